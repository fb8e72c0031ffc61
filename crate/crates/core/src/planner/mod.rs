//! Affordance-map planning: height classification, grid projection with
//! obstacle dilation, obstacle and semantic affordance, their fusion, A*,
//! and conversion of the path into waypoints and primitive actions.

mod astar;
mod observed;
mod pgm;
mod waypoints;

pub use astar::{astar, path_cost, plan_goal, reachable_mask, step_cost, CostUnit, HEURISTIC_SCALE, LAMBDA};
pub use observed::{Frontier, FrontierParams, ObservedMap};
pub use pgm::{export_pgm, parse_pgm, read_affordance, Graymap, PgmError, PgmSidecar};
pub use waypoints::{
    compile_actions, decompose_indices, decompose_waypoints, line_of_sight, refine_line_of_sight, WaypointParams,
};

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Point3, Rect};

pub type Cell = (usize, usize);

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error("no points to project")]
    EmptyInput,
    #[error("affordance layers differ in shape ({0} vs {1} cells)")]
    ShapeMismatch(usize, usize),
    #[error("no traversable path to the goal")]
    NoPath,
    #[error("start cell {0:?} is not traversable")]
    StartBlocked(Cell),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightThresholds {
    /// Points at or below this height are floor.
    pub floor: f64,
    /// Points above `floor` and at or below this height are obstacles.
    pub agent: f64,
}

impl Default for HeightThresholds {
    fn default() -> Self {
        Self { floor: 0.10, agent: 1.8 }
    }
}

/// Split points into `(navigable, obstacle)`; points above the agent are dropped.
pub fn classify_points(points: &[Point3], t: &HeightThresholds) -> (Vec<Point3>, Vec<Point3>) {
    let mut nav = Vec::new();
    let mut obs = Vec::new();
    for p in points {
        if p.z <= t.floor {
            nav.push(*p);
        } else if p.z <= t.agent {
            obs.push(*p);
        }
    }
    (nav, obs)
}

/// Cell lattice geometry shared by every per-cell layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Point2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    /// Lattice anchored at the rectangle's minimum corner and covering it.
    pub fn covering(rect: Rect, resolution: f64) -> Self {
        let width = ((rect.width() / resolution) - 1e-9).ceil().max(1.0) as usize;
        let height = ((rect.height() / resolution) - 1e-9).ceil().max(1.0) as usize;
        Self { origin: Point2::new(rect.min_x, rect.min_y), resolution, width, height }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, (i, j): Cell) -> usize {
        j * self.width + i
    }

    pub fn cell(&self, k: usize) -> Cell {
        (k % self.width, k / self.width)
    }

    pub fn cell_of(&self, p: Point2) -> Option<Cell> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if !(fx >= 0.0 && fy >= 0.0) || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    /// Like `cell_of` but clamps outside points onto the border.
    pub fn nearest_cell(&self, p: Point2) -> Cell {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        let cx = if fx.is_nan() { 0.0 } else { fx.clamp(0.0, (self.width - 1) as f64) };
        let cy = if fy.is_nan() { 0.0 } else { fy.clamp(0.0, (self.height - 1) as f64) };
        (cx as usize, cy as usize)
    }

    pub fn center(&self, (i, j): Cell) -> Point2 {
        Point2::new(
            self.origin.x + (i as f64 + 0.5) * self.resolution,
            self.origin.y + (j as f64 + 0.5) * self.resolution,
        )
    }

    pub fn contains(&self, (i, j): Cell) -> bool {
        i < self.width && j < self.height
    }

    pub fn neighbors8(&self, (i, j): Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
        const OFFSETS: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        let (w, h) = (self.width as isize, self.height as isize);
        OFFSETS.iter().filter_map(move |&(di, dj)| {
            let (x, y) = (i as isize + di, j as isize + dj);
            (x >= 0 && y >= 0 && x < w && y < h).then_some(((x as usize, y as usize), di != 0 && dj != 0))
        })
    }
}

/// Projected 2D map; `obstacle` is post-dilation and wins over `navigable`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub spec: GridSpec,
    pub navigable: Vec<bool>,
    pub obstacle: Vec<bool>,
}

impl GridMap {
    pub fn empty(spec: GridSpec) -> Self {
        Self { spec, navigable: vec![false; spec.len()], obstacle: vec![false; spec.len()] }
    }

    pub fn is_navigable(&self, c: Cell) -> bool {
        self.navigable[self.spec.index(c)]
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.obstacle[self.spec.index(c)]
    }
}

/// Cells marked by points, without dilation. Points outside the lattice are ignored.
pub fn rasterize(spec: &GridSpec, points: &[Point3]) -> Vec<bool> {
    let mut mask = vec![false; spec.len()];
    for p in points {
        if let Some(c) = spec.cell_of(p.xy()) {
            mask[spec.index(c)] = true;
        }
    }
    mask
}

/// Grow a mask by every cell whose center lies within `radius` of a marked cell's center.
pub fn dilate(spec: &GridSpec, mask: &[bool], radius: f64) -> Vec<bool> {
    let r_cells = radius / spec.resolution;
    let reach = (r_cells + 1e-9).floor() as isize;
    let limit = r_cells * r_cells + 1e-9;
    let disc: Vec<(isize, isize)> = (-reach..=reach)
        .flat_map(|di| (-reach..=reach).map(move |dj| (di, dj)))
        .filter(|&(di, dj)| ((di * di + dj * dj) as f64) <= limit)
        .collect();
    let (w, h) = (spec.width as isize, spec.height as isize);
    let mut out = vec![false; mask.len()];
    for (k, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        let (i, j) = spec.cell(k);
        for &(di, dj) in &disc {
            let (x, y) = (i as isize + di, j as isize + dj);
            if x >= 0 && y >= 0 && x < w && y < h {
                out[(y * w + x) as usize] = true;
            }
        }
    }
    out
}

/// Combine raw navigable and obstacle masks into a dilated map.
pub fn grid_from_masks(spec: GridSpec, navigable: &[bool], obstacle: &[bool], dilation_radius: f64) -> GridMap {
    let obstacle = dilate(&spec, obstacle, dilation_radius);
    let navigable = navigable.iter().zip(&obstacle).map(|(n, o)| *n && !*o).collect();
    GridMap { spec, navigable, obstacle }
}

/// Bin points onto a lattice spanning them (padded by the dilation radius)
/// and dilate the obstacle mask.
pub fn build_grid(
    navigable: &[Point3],
    obstacle: &[Point3],
    resolution: f64,
    dilation_radius: f64,
) -> Result<GridMap, PlannerError> {
    let mut all = navigable.iter().chain(obstacle);
    let Some(first) = all.next() else {
        return Err(PlannerError::EmptyInput);
    };
    let mut r = Rect::new(first.x, first.y, first.x, first.y);
    for p in all {
        r.min_x = r.min_x.min(p.x);
        r.min_y = r.min_y.min(p.y);
        r.max_x = r.max_x.max(p.x);
        r.max_y = r.max_y.max(p.y);
    }
    let pad = dilation_radius + resolution;
    let snap_down = |v: f64| ((v - pad) / resolution).floor() * resolution;
    let snap_up = |v: f64| ((v + pad) / resolution).ceil() * resolution;
    let extent = Rect::new(snap_down(r.min_x), snap_down(r.min_y), snap_up(r.max_x), snap_up(r.max_y));
    let spec = GridSpec::covering(extent, resolution);
    Ok(build_grid_in(spec, navigable, obstacle, dilation_radius))
}

/// `build_grid` on a caller-chosen lattice.
pub fn build_grid_in(spec: GridSpec, navigable: &[Point3], obstacle: &[Point3], dilation_radius: f64) -> GridMap {
    grid_from_masks(spec, &rasterize(&spec, navigable), &rasterize(&spec, obstacle), dilation_radius)
}

/// Exact Euclidean distance (meters, between cell centers) from every cell
/// to the nearest marked cell; `None` when nothing is marked.
pub fn distance_to_mask(spec: &GridSpec, mask: &[bool]) -> Option<Vec<f64>> {
    if !mask.iter().any(|m| *m) {
        return None;
    }
    let (w, h) = (spec.width, spec.height);
    let inf = f64::INFINITY;
    let mut d2: Vec<f64> = mask.iter().map(|m| if *m { 0.0 } else { inf }).collect();
    let mut f = vec![0.0; w.max(h)];
    let mut out = vec![0.0; w.max(h)];
    for j in 0..h {
        f[..w].copy_from_slice(&d2[j * w..(j + 1) * w]);
        edt_1d(&f[..w], &mut out[..w]);
        d2[j * w..(j + 1) * w].copy_from_slice(&out[..w]);
    }
    for i in 0..w {
        for j in 0..h {
            f[j] = d2[j * w + i];
        }
        edt_1d(&f[..h], &mut out[..h]);
        for j in 0..h {
            d2[j * w + i] = out[j];
        }
    }
    Some(d2.into_iter().map(|v| v.sqrt() * spec.resolution).collect())
}

/// Lower envelope of parabolas (squared 1D distance transform).
fn edt_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let first = (0..n).find(|&q| f[q].is_finite());
    let Some(first) = first else {
        d.iter_mut().for_each(|x| *x = f64::INFINITY);
        return;
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            // z[0] is -inf, so this never underflows.
            if s <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}

/// `(d - lo) / (hi - lo)`, or 1 when the range is degenerate.
pub fn normalize(d: f64, lo: f64, hi: f64) -> f64 {
    if hi - lo <= 0.0 {
        1.0
    } else {
        ((d - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleAffordance {
    pub a_obs: Vec<f64>,
    pub d_min: f64,
    pub d_max: f64,
}

/// Obstacle-avoidance affordance over navigable cells (0 elsewhere).
///
/// The normalization's lower bound is the obstacle itself, so every cell
/// that clears `tau_obs` keeps a strictly positive value.
pub fn obstacle_affordance(grid: &GridMap, tau_obs: f64) -> ObstacleAffordance {
    let n = grid.spec.len();
    let Some(dist) = distance_to_mask(&grid.spec, &grid.obstacle) else {
        let a_obs = grid.navigable.iter().map(|nav| if *nav { 1.0 } else { 0.0 }).collect();
        return ObstacleAffordance { a_obs, d_min: 0.0, d_max: 0.0 };
    };
    let d_min = 0.0;
    let d_max = (0..n).filter(|&k| grid.navigable[k]).map(|k| dist[k]).fold(0.0, f64::max);
    let a_obs = (0..n)
        .map(|k| {
            if !grid.navigable[k] || dist[k] < tau_obs {
                0.0
            } else {
                normalize(dist[k], d_min, d_max)
            }
        })
        .collect();
    ObstacleAffordance { a_obs, d_min, d_max }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticAffordance {
    pub a_tgt: Vec<f64>,
    pub d_min: f64,
    pub d_max: f64,
}

/// Target-proximity affordance over navigable cells (0 elsewhere).
pub fn semantic_affordance(grid: &GridMap, target: Point2) -> SemanticAffordance {
    let n = grid.spec.len();
    let dist: Vec<f64> = (0..n).map(|k| grid.spec.center(grid.spec.cell(k)).distance(target)).collect();
    let nav = || (0..n).filter(|&k| grid.navigable[k]).map(|k| dist[k]);
    let d_min = nav().fold(f64::INFINITY, f64::min);
    let d_max = nav().fold(f64::NEG_INFINITY, f64::max);
    let a_tgt = (0..n)
        .map(|k| if grid.navigable[k] { 1.0 - normalize(dist[k], d_min, d_max) } else { 0.0 })
        .map(|v| if v.is_finite() { v } else { 0.0 })
        .collect();
    SemanticAffordance { a_tgt, d_min, d_max }
}

/// Zero where `a_obs` is zero, otherwise `a_tgt` clipped to `[0.1, 1]`.
pub fn fuse_affordance(a_obs: &[f64], a_tgt: &[f64]) -> Result<Vec<f64>, PlannerError> {
    if a_obs.len() != a_tgt.len() {
        return Err(PlannerError::ShapeMismatch(a_obs.len(), a_tgt.len()));
    }
    Ok(a_obs.iter().zip(a_tgt).map(|(o, t)| if *o == 0.0 { 0.0 } else { t.clamp(0.1, 1.0) }).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffordanceMap {
    pub grid: GridMap,
    pub a_obs: Vec<f64>,
    pub a_tgt: Vec<f64>,
    pub a_final: Vec<f64>,
    pub target: Point2,
    pub d_min: f64,
    pub d_max: f64,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl AffordanceMap {
    pub fn compute(grid: GridMap, target: Point2, tau_obs: f64) -> Self {
        let obs = obstacle_affordance(&grid, tau_obs);
        let tgt = semantic_affordance(&grid, target);
        let a_final = fuse_affordance(&obs.a_obs, &tgt.a_tgt).expect("layers share the grid");
        Self {
            grid,
            a_obs: obs.a_obs,
            a_tgt: tgt.a_tgt,
            a_final,
            target,
            d_min: obs.d_min,
            d_max: obs.d_max,
            dt_min: tgt.d_min,
            dt_max: tgt.d_max,
        }
    }

    /// A bare map over given `a_final` values, for planning tests.
    pub fn from_final(spec: GridSpec, a_final: Vec<f64>) -> Self {
        assert_eq!(spec.len(), a_final.len());
        let navigable: Vec<bool> = a_final.iter().map(|a| *a > 0.0).collect();
        let obstacle = navigable.iter().map(|n| !n).collect();
        Self {
            grid: GridMap { spec, navigable, obstacle },
            a_obs: a_final.clone(),
            a_tgt: a_final.clone(),
            a_final,
            target: spec.origin,
            d_min: 0.0,
            d_max: 0.0,
            dt_min: 0.0,
            dt_max: 0.0,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.grid.spec
    }

    pub fn value(&self, c: Cell) -> f64 {
        self.a_final[self.grid.spec.index(c)]
    }

    pub fn passable(&self, c: Cell) -> bool {
        self.grid.spec.contains(c) && self.value(c) > 0.0
    }

    /// Force cells within `radius` of `p` to zero affordance.
    pub fn block_disc(&mut self, p: Point2, radius: f64) {
        let spec = self.grid.spec;
        for k in 0..spec.len() {
            if spec.center(spec.cell(k)).distance(p) <= radius {
                self.a_final[k] = 0.0;
                self.a_obs[k] = 0.0;
            }
        }
    }

    /// Nearest passable cell to `p` (ties: lowest row-major index).
    pub fn nearest_passable(&self, p: Point2) -> Option<Cell> {
        let spec = self.grid.spec;
        (0..spec.len())
            .filter(|&k| self.a_final[k] > 0.0)
            .map(|k| (spec.center(spec.cell(k)).distance_sq(p), k))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, k)| spec.cell(k))
    }

    /// Path distance, in tenths of a cell, from `from` through navigable
    /// cells off obstacles; `u32::MAX` where there is no such path.
    pub fn free_distance(&self, from: Cell) -> Vec<u32> {
        let spec = self.grid.spec;
        let free = |k: usize| self.grid.navigable[k] && !self.grid.obstacle[k];
        let mut dist = vec![u32::MAX; spec.len()];
        let mut heap = BinaryHeap::new();
        dist[spec.index(from)] = 0;
        heap.push(Reverse((0u32, spec.index(from))));
        while let Some(Reverse((d, k))) = heap.pop() {
            if d > dist[k] {
                continue;
            }
            for (n, diagonal) in spec.neighbors8(spec.cell(k)) {
                let m = spec.index(n);
                let nd = d + if diagonal { 14 } else { 10 };
                if free(m) && nd < dist[m] {
                    dist[m] = nd;
                    heap.push(Reverse((nd, m)));
                }
            }
        }
        dist
    }

    /// Cell to plan from at `p`: its own cell when passable, else the
    /// nearest passable cell reachable in a straight line that stays off
    /// obstacle cells, else the passable cell nearest along free cells,
    /// else the nearest passable cell. A straight line starting on an
    /// obstacle cell may cross the band it starts in, by the shortest way out.
    pub fn start_cell(&self, p: Point2) -> Option<Cell> {
        let spec = self.grid.spec;
        let here = spec.cell_of(p);
        if let Some(c) = here.filter(|c| self.passable(*c)) {
            return Some(c);
        }
        let blocked = |x: Point2| spec.cell_of(x).is_some_and(|c| self.grid.is_obstacle(c));
        let depth = if blocked(p) {
            (0..spec.len())
                .filter(|&k| !self.grid.obstacle[k])
                .map(|k| spec.center(spec.cell(k)).distance(p))
                .fold(f64::INFINITY, f64::min)
        } else {
            0.0
        };
        let mut cells: Vec<(f64, usize)> = (0..spec.len())
            .filter(|&k| self.a_final[k] > 0.0)
            .map(|k| (spec.center(spec.cell(k)).distance_sq(p), k))
            .collect();
        cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let clear = |q: Point2| {
            let len = p.distance(q);
            let n = (len / (0.5 * spec.resolution)).ceil().max(1.0) as usize;
            let mut left = false;
            (0..=n).all(|s| {
                let t = s as f64 / n as f64;
                let x = Point2::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y));
                if !blocked(x) {
                    left = true;
                    return true;
                }
                !left && t * len <= depth + spec.resolution
            })
        };
        if let Some((_, k)) = cells.iter().find(|(_, k)| clear(spec.center(spec.cell(*k)))) {
            return Some(spec.cell(*k));
        }
        if let Some(c) = here {
            let dist = self.free_distance(c);
            if let Some((_, k)) = cells.iter().filter(|(_, k)| dist[*k] < u32::MAX).min_by_key(|(_, k)| dist[*k]) {
                return Some(spec.cell(*k));
            }
        }
        cells.first().map(|(_, k)| spec.cell(*k))
    }
}

/// A complete plan from the agent to a target.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub start: Cell,
    pub goal: Cell,
    pub path: Vec<Cell>,
    pub cost: CostUnit,
    pub waypoints: Vec<Point2>,
    /// Path index of each waypoint.
    pub waypoint_indices: Vec<usize>,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    pub resolution: f64,
    pub dilation_radius: f64,
    pub heights: HeightThresholds,
    pub waypoints: WaypointParams,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            resolution: 0.05,
            dilation_radius: 0.2,
            heights: HeightThresholds::default(),
            waypoints: WaypointParams::default(),
        }
    }
}

/// Plan from `from` to the passable cell nearest `target` within `goal_radius`.
pub fn plan(
    map: &AffordanceMap,
    from: Point2,
    target: Point2,
    goal_radius: f64,
    params: &WaypointParams,
    fine_prefix: bool,
) -> Result<Plan, PlannerError> {
    let spec = *map.spec();
    let start = map.start_cell(from);
    let Some(start) = start else {
        return Err(PlannerError::StartBlocked(spec.nearest_cell(from)));
    };
    let goal = plan_goal(map, start, target, goal_radius).ok_or(PlannerError::NoPath)?;
    let (path, cost) = astar(map, start, goal)?;
    let idx = decompose_indices(&path, &spec, params, fine_prefix);
    let idx = refine_line_of_sight(map, &path, &idx);
    let length = path.windows(2).map(|w| spec.center(w[0]).distance(spec.center(w[1]))).sum();
    Ok(Plan {
        start,
        goal,
        waypoints: idx.iter().map(|&k| spec.center(path[k])).collect(),
        waypoint_indices: idx,
        path,
        cost,
        length,
    })
}
