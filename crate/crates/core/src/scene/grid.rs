use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::SceneError;
use crate::geometry::Point2;

pub type CellIndex = (usize, usize);

/// Boolean occupancy lattice anchored at `origin`; cell `(i, j)` covers
/// `[origin.x + i*res, origin.x + (i+1)*res) x [origin.y + j*res, ...)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NavGridDoc", into = "NavGridDoc")]
pub struct NavGrid {
    pub origin: Point2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    cells: Vec<bool>,
}

/// On-disk form: one `'1'`/`'0'` string per row, row 0 first.
#[derive(Serialize, Deserialize)]
struct NavGridDoc {
    origin: Point2,
    resolution: f64,
    width: usize,
    height: usize,
    rows: Vec<String>,
}

impl From<NavGrid> for NavGridDoc {
    fn from(g: NavGrid) -> Self {
        let rows = (0..g.height)
            .map(|j| {
                (0..g.width)
                    .map(|i| if g.cells[j * g.width + i] { '1' } else { '0' })
                    .collect()
            })
            .collect();
        NavGridDoc { origin: g.origin, resolution: g.resolution, width: g.width, height: g.height, rows }
    }
}

impl TryFrom<NavGridDoc> for NavGrid {
    type Error = String;

    fn try_from(doc: NavGridDoc) -> Result<Self, Self::Error> {
        if !(doc.resolution.is_finite() && doc.resolution > 0.0) || !doc.origin.is_finite() {
            return Err("navigable grid needs a positive resolution and finite origin".into());
        }
        if doc.rows.len() != doc.height {
            return Err(format!("expected {} rows, found {}", doc.height, doc.rows.len()));
        }
        let total = doc.width.checked_mul(doc.height).ok_or("grid dimensions overflow")?;
        let mut cells = Vec::with_capacity(total);
        for (j, row) in doc.rows.iter().enumerate() {
            if row.len() != doc.width {
                return Err(format!("row {j} has {} cells, expected {}", row.len(), doc.width));
            }
            for c in row.bytes() {
                match c {
                    b'1' => cells.push(true),
                    b'0' => cells.push(false),
                    other => return Err(format!("row {j}: unexpected cell byte {other:#x}")),
                }
            }
        }
        Ok(NavGrid { origin: doc.origin, resolution: doc.resolution, width: doc.width, height: doc.height, cells })
    }
}

impl NavGrid {
    pub fn new(origin: Point2, resolution: f64, width: usize, height: usize) -> Self {
        Self { origin, resolution, width, height, cells: vec![false; width * height] }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.cells.len() != self.width * self.height {
            return Err(SceneError::Invalid("navigable grid size mismatch".into()));
        }
        Ok(())
    }

    pub fn get(&self, (i, j): CellIndex) -> bool {
        i < self.width && j < self.height && self.cells[j * self.width + i]
    }

    pub fn set(&mut self, (i, j): CellIndex, value: bool) {
        assert!(i < self.width && j < self.height, "cell ({i}, {j}) out of range");
        self.cells[j * self.width + i] = value;
    }

    pub fn cell_of(&self, p: Point2) -> Option<CellIndex> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if !(fx >= 0.0 && fy >= 0.0) || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn cell_center(&self, (i, j): CellIndex) -> Point2 {
        Point2::new(
            self.origin.x + (i as f64 + 0.5) * self.resolution,
            self.origin.y + (j as f64 + 0.5) * self.resolution,
        )
    }

    pub fn is_navigable_at(&self, p: Point2) -> bool {
        self.cell_of(p).is_some_and(|c| self.get(c))
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn navigable_cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.height)
            .flat_map(move |j| (0..self.width).map(move |i| (i, j)))
            .filter(move |c| self.get(*c))
    }

    pub fn neighbors4(&self, (i, j): CellIndex) -> impl Iterator<Item = CellIndex> + '_ {
        let (w, h) = (self.width as isize, self.height as isize);
        [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)]
            .into_iter()
            .map(move |(di, dj)| (i as isize + di, j as isize + dj))
            .filter(move |&(x, y)| x >= 0 && y >= 0 && x < w && y < h)
            .map(|(x, y)| (x as usize, y as usize))
    }

    /// 4-connected components, labelled in row-major discovery order.
    pub fn components(&self) -> Vec<Vec<CellIndex>> {
        let mut seen = vec![false; self.cells.len()];
        let mut out = Vec::new();
        for start in self.navigable_cells().collect::<Vec<_>>() {
            if seen[start.1 * self.width + start.0] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start.1 * self.width + start.0] = true;
            while let Some(c) = queue.pop_front() {
                comp.push(c);
                for n in self.neighbors4(c) {
                    let k = n.1 * self.width + n.0;
                    if self.cells[k] && !seen[k] {
                        seen[k] = true;
                        queue.push_back(n);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// Keep only the largest component (ties: first discovered).
    pub fn retain_largest_component(&mut self) {
        let comps = self.components();
        let Some(best) = comps.iter().enumerate().max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0))) else {
            return;
        };
        let keep = best.1.clone();
        self.cells.iter_mut().for_each(|c| *c = false);
        for c in keep {
            self.set(c, true);
        }
    }
}
