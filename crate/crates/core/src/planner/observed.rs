//! Episode-long accumulation of projected depth evidence.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{classify_points, dilate, grid_from_masks, rasterize, Cell, GridMap, GridSpec, HeightThresholds};
use crate::geometry::{Point2, Point3, Rect};

/// Raw floor/solid hits over the whole scene extent, plus collision evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedMap {
    pub spec: GridSpec,
    floor: Vec<bool>,
    solid: Vec<bool>,
    last_solid: Vec<bool>,
    contact: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontierParams {
    /// Unseen cells this close to a seen solid count as explained.
    pub explained_radius: f64,
    /// Unseen pockets smaller than this (m^2) count as explained: the floor
    /// under and behind furniture, wall interiors.
    pub min_pocket_area: f64,
    pub min_cells: usize,
}

impl Default for FrontierParams {
    fn default() -> Self {
        Self { explained_radius: 0.3, min_pocket_area: 1.0, min_cells: 10 }
    }
}

/// A cluster of frontier cells and its representative position.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    pub position: Point2,
    pub size: usize,
}

impl ObservedMap {
    pub fn new(bounds: Rect, resolution: f64) -> Self {
        let spec = GridSpec::covering(bounds, resolution);
        let n = spec.len();
        Self { spec, floor: vec![false; n], solid: vec![false; n], last_solid: vec![false; n], contact: vec![false; n] }
    }

    /// Project one sweep of depth points.
    pub fn integrate(&mut self, depth: &[Point3], heights: &HeightThresholds) {
        let (nav, obs) = classify_points(depth, heights);
        let floor = rasterize(&self.spec, &nav);
        let solid = rasterize(&self.spec, &obs);
        for k in 0..self.spec.len() {
            self.floor[k] |= floor[k];
            self.solid[k] |= solid[k];
        }
        self.last_solid = solid;
    }

    /// Mark raw obstacle evidence at the given points.
    pub fn add_contact(&mut self, points: &[Point2]) {
        for p in points {
            if let Some(c) = self.spec.cell_of(*p) {
                let k = self.spec.index(c);
                self.contact[k] = true;
            }
        }
    }

    pub fn contact_count(&self) -> usize {
        self.contact.iter().filter(|c| **c).count()
    }

    /// Seen solid, or contact evidence, at `c`.
    pub fn is_blocked(&self, c: Cell) -> bool {
        let k = self.spec.index(c);
        self.solid[k] || self.contact[k]
    }

    pub fn is_observed(&self, c: Cell) -> bool {
        let k = self.spec.index(c);
        self.floor[k] || self.solid[k]
    }

    /// Dilated planning grid. `persist` keeps every solid seen so far rather
    /// than only the latest sweep. With `optimistic`, never-observed cells
    /// count as navigable unless nearby solids or a small enclosing pocket
    /// explain them (the inside of furniture, say).
    pub fn grid(&self, dilation_radius: f64, persist: bool, optimistic: Option<&FrontierParams>) -> GridMap {
        let solids = if persist { &self.solid } else { &self.last_solid };
        let obstacle: Vec<bool> = solids.iter().zip(&self.contact).map(|(s, c)| *s || *c).collect();
        let open = optimistic.map(|params| self.unexplained(params));
        let navigable: Vec<bool> = (0..self.spec.len())
            .map(|k| self.floor[k] || open.as_ref().is_some_and(|o| o[k]))
            .collect();
        grid_from_masks(self.spec, &navigable, &obstacle, dilation_radius)
    }

    /// Unseen cells not accounted for by nearby solids or small pockets.
    fn unexplained(&self, params: &FrontierParams) -> Vec<bool> {
        let spec = self.spec;
        let near_solid = dilate(&spec, &self.solid, params.explained_radius);
        let mut open: Vec<bool> = (0..spec.len()).map(|k| !self.floor[k] && !self.solid[k] && !near_solid[k]).collect();
        let min_pocket = (params.min_pocket_area / (spec.resolution * spec.resolution)).ceil() as usize;
        let mut seen = vec![false; spec.len()];
        for start in 0..spec.len() {
            if !open[start] || seen[start] {
                continue;
            }
            seen[start] = true;
            let mut pocket = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(k) = queue.pop_front() {
                for (n, _) in spec.neighbors8(spec.cell(k)).filter(|(_, diagonal)| !diagonal) {
                    let m = spec.index(n);
                    if open[m] && !seen[m] {
                        seen[m] = true;
                        pocket.push(m);
                        queue.push_back(m);
                    }
                }
            }
            if pocket.len() < min_pocket {
                for k in pocket {
                    open[k] = false;
                }
            }
        }
        open
    }

    /// Observed floor cells bordering unexplained space, grouped 8-connected.
    ///
    /// Clusters smaller than `min_cells` are dropped, as are clusters with
    /// no cell within `reach` of a `mask` cell: the edge of what was seen
    /// often sits inside an obstacle margin the agent cannot stand in. The
    /// representative is the cell within reach nearest the centroid.
    pub fn frontiers(&self, mask: &[bool], params: &FrontierParams, reach: f64) -> Vec<Frontier> {
        let spec = self.spec;
        let open = self.unexplained(params);
        let near_mask = dilate(&spec, mask, reach);
        let unknown = |k: usize| open[k];
        let is_frontier: Vec<bool> = (0..spec.len())
            .map(|k| {
                if !self.floor[k] {
                    return false;
                }
                let (i, j) = spec.cell(k);
                [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)].iter().any(|&(di, dj)| {
                    let (x, y) = (i as isize + di, j as isize + dj);
                    x >= 0
                        && y >= 0
                        && (x as usize) < spec.width
                        && (y as usize) < spec.height
                        && unknown(spec.index((x as usize, y as usize)))
                })
            })
            .collect();
        let mut seen = vec![false; spec.len()];
        let mut out = Vec::new();
        for start in 0..spec.len() {
            if !is_frontier[start] || seen[start] {
                continue;
            }
            seen[start] = true;
            let mut cluster = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(k) = queue.pop_front() {
                for (n, _) in spec.neighbors8(spec.cell(k)) {
                    let m = spec.index(n);
                    if is_frontier[m] && !seen[m] {
                        seen[m] = true;
                        cluster.push(m);
                        queue.push_back(m);
                    }
                }
            }
            if cluster.len() < params.min_cells {
                continue;
            }
            let n = cluster.len() as f64;
            let (sx, sy) = cluster.iter().fold((0.0, 0.0), |acc, &k| {
                let c = spec.center(spec.cell(k));
                (acc.0 + c.x, acc.1 + c.y)
            });
            let centroid = Point2::new(sx / n, sy / n);
            let Some(rep) = cluster.iter().copied().filter(|k| near_mask[*k]).min_by(|a, b| {
                let da = spec.center(spec.cell(*a)).distance_sq(centroid);
                let db = spec.center(spec.cell(*b)).distance_sq(centroid);
                da.total_cmp(&db).then(a.cmp(b))
            }) else {
                continue;
            };
            out.push(Frontier { position: spec.center(spec.cell(rep)), size: cluster.len() });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn persistence_and_optimism() {
        let mut m = ObservedMap::new(Rect::new(0.0, 0.0, 2.0, 1.0), 0.05);
        let h = HeightThresholds::default();
        m.integrate(&[Point3::new(0.52, 0.52, 0.0), Point3::new(1.52, 0.52, 0.8)], &h);
        m.integrate(&[Point3::new(0.57, 0.52, 0.0)], &h);
        let wall = m.spec.cell_of(Point2::new(1.52, 0.52)).unwrap();
        assert!(m.grid(0.0, true, None).is_obstacle(wall));
        assert!(!m.grid(0.0, false, None).is_obstacle(wall));
        let unseen = m.spec.cell_of(Point2::new(0.1, 0.1)).unwrap();
        assert!(!m.grid(0.0, true, None).is_navigable(unseen));
        assert!(m.grid(0.0, true, Some(&FrontierParams::default())).is_navigable(unseen));
        m.add_contact(&[Point2::new(0.1, 0.1)]);
        assert!(m.grid(0.0, true, Some(&FrontierParams::default())).is_obstacle(unseen));
    }

    #[test]
    fn unseen_inside_of_a_box_is_not_optimistic() {
        let mut m = ObservedMap::new(Rect::new(0.0, 0.0, 4.0, 4.0), 0.05);
        let h = HeightThresholds::default();
        // Side faces of a 0.9 x 0.6 box; its top and inside stay unseen.
        let mut faces = Vec::new();
        for k in 0..18 {
            let x = 1.0 + 0.05 * k as f64 + 0.025;
            faces.push(Point3::new(x, 1.0, 0.3));
            faces.push(Point3::new(x, 1.6, 0.3));
        }
        for k in 0..12 {
            let y = 1.0 + 0.05 * k as f64 + 0.025;
            faces.push(Point3::new(1.0, y, 0.3));
            faces.push(Point3::new(1.9, y, 0.3));
        }
        m.integrate(&faces, &h);
        let params = FrontierParams::default();
        let grid = m.grid(0.0, true, Some(&params));
        assert!(!grid.is_navigable(m.spec.cell_of(Point2::new(1.45, 1.3)).unwrap()));
        assert!(grid.is_navigable(m.spec.cell_of(Point2::new(3.0, 3.0)).unwrap()));
    }

    #[test]
    fn frontier_along_seen_edge() {
        let mut m = ObservedMap::new(Rect::new(0.0, 0.0, 2.0, 2.0), 0.05);
        // Floor seen in the left half only: the frontier is the column at x just below 1.
        let pts: Vec<Point3> = (0..20)
            .flat_map(|i| (0..40).map(move |j| Point3::new(0.025 + 0.05 * i as f64, 0.025 + 0.05 * j as f64, 0.0)))
            .collect();
        m.integrate(&pts, &HeightThresholds::default());
        let all = vec![true; m.spec.len()];
        let p = FrontierParams::default();
        let f = m.frontiers(&all, &p, 0.0);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].size, 40);
        assert!((f[0].position.x - 0.975).abs() < 1e-9);
        assert!(m.frontiers(&all, &FrontierParams { min_cells: 41, ..p }, 0.0).is_empty());
        // The unseen right half is 2 m^2.
        assert!(m.frontiers(&all, &FrontierParams { min_pocket_area: 2.1, ..p }, 0.0).is_empty());
        // Reachable only up to x = 0.7: the edge at 0.975 is 0.275 m out.
        let left: Vec<bool> = (0..m.spec.len()).map(|k| m.spec.center(m.spec.cell(k)).x < 0.7).collect();
        assert!(m.frontiers(&left, &p, 0.2).is_empty());
        let f = m.frontiers(&left, &p, 0.5);
        assert_eq!((f.len(), f[0].size), (1, 40));
        assert!((f[0].position.x - 0.975).abs() < 1e-9);
    }
}
