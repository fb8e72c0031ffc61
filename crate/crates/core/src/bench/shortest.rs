//! Ground-truth shortest path to the nearest success cell.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use super::BenchError;
use crate::geometry::Point2;
use crate::scene::{CellIndex, NavGrid, Scene};

/// Path length as a count of axis and diagonal moves. Distinct counts never
/// tie in metric length, so comparisons on the float value are exact enough.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MoveCount {
    pub straight: u32,
    pub diagonal: u32,
}

impl MoveCount {
    pub fn cells(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    fn add(self, diagonal: bool) -> Self {
        if diagonal {
            Self { diagonal: self.diagonal + 1, ..self }
        } else {
            Self { straight: self.straight + 1, ..self }
        }
    }
}

#[derive(PartialEq)]
struct Entry(MoveCount, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.cells().total_cmp(&self.0.cells()).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// 8-connected moves; a diagonal needs both adjacent axis cells free.
pub fn grid_moves(grid: &NavGrid, (i, j): CellIndex) -> Vec<(CellIndex, bool)> {
    let mut out = Vec::with_capacity(8);
    for dj in -1i64..=1 {
        for di in -1i64..=1 {
            if di == 0 && dj == 0 {
                continue;
            }
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            if ni < 0 || nj < 0 || ni >= grid.width as i64 || nj >= grid.height as i64 {
                continue;
            }
            let n = (ni as usize, nj as usize);
            if !grid.get(n) {
                continue;
            }
            let diagonal = di != 0 && dj != 0;
            if diagonal && !(grid.get((ni as usize, j)) && grid.get((i, nj as usize))) {
                continue;
            }
            out.push((n, diagonal));
        }
    }
    out
}

/// Navigable cell holding `p`, or the navigable cell whose center is nearest.
pub fn start_cell(grid: &NavGrid, p: Point2) -> Option<CellIndex> {
    if let Some(c) = grid.cell_of(p).filter(|c| grid.get(*c)) {
        return Some(c);
    }
    grid.navigable_cells().min_by(|a, b| grid.cell_center(*a).distance(p).total_cmp(&grid.cell_center(*b).distance(p)))
}

/// Uniform-cost search over `grid` from `start` to the first cell for which
/// `is_goal` holds.
pub fn search(grid: &NavGrid, start: CellIndex, is_goal: impl Fn(CellIndex) -> bool) -> Option<MoveCount> {
    let idx = |(i, j): CellIndex| j * grid.width + i;
    let mut best: Vec<Option<MoveCount>> = vec![None; grid.width * grid.height];
    let mut done = vec![false; grid.width * grid.height];
    let mut heap = BinaryHeap::new();
    best[idx(start)] = Some(MoveCount::default());
    heap.push(Entry(MoveCount::default(), idx(start)));
    while let Some(Entry(cost, k)) = heap.pop() {
        if done[k] {
            continue;
        }
        done[k] = true;
        let cell = (k % grid.width, k / grid.width);
        if is_goal(cell) {
            return Some(cost);
        }
        for (n, diagonal) in grid_moves(grid, cell) {
            let nk = idx(n);
            let c = cost.add(diagonal);
            if !done[nk] && best[nk].is_none_or(|b| c.cells() < b.cells()) {
                best[nk] = Some(c);
                heap.push(Entry(c, nk));
            }
        }
    }
    None
}

/// Metric length of the shortest navigable path from `from` to a cell whose
/// center lies within `eps` of a footprint center of any object in `classes`.
pub fn shortest_path_length(scene: &Scene, from: Point2, classes: &BTreeSet<String>, eps: f64) -> Result<f64, BenchError> {
    let targets: Vec<Point2> =
        scene.objects.iter().filter(|o| classes.contains(&o.class)).map(|o| o.bounds.footprint().center()).collect();
    if targets.is_empty() {
        return Err(BenchError::NoSatisfyingObject(classes.iter().cloned().collect()));
    }
    if targets.iter().any(|t| t.distance(from) <= eps) {
        return Ok(0.0);
    }
    let grid = &scene.navigable_grid;
    let start = start_cell(grid, from).ok_or(BenchError::Unreachable)?;
    let goal = |c: CellIndex| targets.iter().any(|t| t.distance(grid.cell_center(c)) <= eps);
    search(grid, start, goal).map(|m| m.cells() * grid.resolution).ok_or(BenchError::Unreachable)
}
