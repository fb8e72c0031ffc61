//! A* over the affordance map with integer costs.
//!
//! Moving into cell `c` over a step of length `l` meters costs
//! `ceil(l * (1 + LAMBDA * (1 - a_final(c))) * 1e6)`. The heuristic is
//! `floor(euclid * 1e6)`, which never exceeds the true remaining cost, so
//! the returned path is optimal and costs compare exactly.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use super::{AffordanceMap, Cell, PlannerError};
use crate::geometry::Point2;

pub type CostUnit = u64;

pub const LAMBDA: f64 = 4.0;
pub const HEURISTIC_SCALE: f64 = 1e6;

pub fn step_cost(length: f64, a_final: f64) -> CostUnit {
    (length * (1.0 + LAMBDA * (1.0 - a_final)) * HEURISTIC_SCALE).ceil() as CostUnit
}

/// Passable neighbors of `c` with the step length; diagonal moves need both
/// adjacent orthogonal cells passable.
pub(crate) fn moves(map: &AffordanceMap, c: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
    let spec = *map.spec();
    let res = spec.resolution;
    spec.neighbors8(c).collect::<Vec<_>>().into_iter().filter_map(move |(n, diagonal)| {
        if !map.passable(n) {
            return None;
        }
        if diagonal && !(map.passable((n.0, c.1)) && map.passable((c.0, n.1))) {
            return None;
        }
        Some((n, if diagonal { res * std::f64::consts::SQRT_2 } else { res }))
    })
}

fn heuristic(map: &AffordanceMap, c: Cell, goal: Point2) -> CostUnit {
    (map.spec().center(c).distance(goal) * HEURISTIC_SCALE).floor() as CostUnit
}

/// Optimal path from `start` to `goal` (both inclusive) and its cost.
pub fn astar(map: &AffordanceMap, start: Cell, goal: Cell) -> Result<(Vec<Cell>, CostUnit), PlannerError> {
    let spec = *map.spec();
    if !map.passable(start) {
        return Err(PlannerError::StartBlocked(start));
    }
    if !map.passable(goal) {
        return Err(PlannerError::NoPath);
    }
    let goal_pt = spec.center(goal);
    let n = spec.len();
    let mut g = vec![CostUnit::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let s = spec.index(start);
    g[s] = 0;
    open.push(Reverse((heuristic(map, start, goal_pt), 0, s)));
    let target = spec.index(goal);
    while let Some(Reverse((_, gc, k))) = open.pop() {
        if closed[k] || gc > g[k] {
            continue;
        }
        if k == target {
            let mut path = vec![spec.cell(k)];
            let mut cur = k;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push(spec.cell(cur));
            }
            path.reverse();
            return Ok((path, gc));
        }
        closed[k] = true;
        let c = spec.cell(k);
        for (nb, len) in moves(map, c) {
            let m = spec.index(nb);
            if closed[m] {
                continue;
            }
            let cand = gc + step_cost(len, map.a_final[m]);
            if cand < g[m] {
                g[m] = cand;
                parent[m] = k;
                open.push(Reverse((cand + heuristic(map, nb, goal_pt), cand, m)));
            }
        }
    }
    Err(PlannerError::NoPath)
}

/// Total cost of an explicit path under the same step rule.
pub fn path_cost(map: &AffordanceMap, path: &[Cell]) -> CostUnit {
    let res = map.spec().resolution;
    path.windows(2)
        .map(|w| {
            let diagonal = w[0].0 != w[1].0 && w[0].1 != w[1].1;
            let len = if diagonal { res * std::f64::consts::SQRT_2 } else { res };
            step_cost(len, map.value(w[1]))
        })
        .sum()
}

/// Cells reachable from `start` under the move rule.
pub fn reachable_mask(map: &AffordanceMap, start: Cell) -> Vec<bool> {
    let spec = *map.spec();
    let mut seen = vec![false; spec.len()];
    if !map.passable(start) {
        return seen;
    }
    seen[spec.index(start)] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for (n, _) in moves(map, c) {
            let k = spec.index(n);
            if !seen[k] {
                seen[k] = true;
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Reachable passable cell nearest `target`, if one lies within `radius`.
pub fn plan_goal(map: &AffordanceMap, start: Cell, target: Point2, radius: f64) -> Option<Cell> {
    let spec = *map.spec();
    let reach = reachable_mask(map, start);
    (0..spec.len())
        .filter(|&k| reach[k])
        .map(|k| (spec.center(spec.cell(k)).distance(target), k))
        .filter(|(d, _)| *d <= radius)
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, k)| spec.cell(k))
}
