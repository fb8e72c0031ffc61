//! Path decomposition into waypoints and waypoint-to-action compilation.

use serde::{Deserialize, Serialize};

use super::{AffordanceMap, Cell, GridSpec};
use crate::geometry::{angle_diff_degrees, Point2};
use crate::scene::{Action, AgentPose, MOVE_STEP, TURN_STEP};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaypointParams {
    /// Standard spacing, in motion steps.
    pub n_waypoint: usize,
    /// Spacing inside the fine prefix, in motion steps.
    pub n_block: usize,
    /// Length of the finely sampled initial segment, meters.
    pub fine_prefix_m: f64,
}

impl Default for WaypointParams {
    fn default() -> Self {
        Self { n_waypoint: 8, n_block: 2, fine_prefix_m: 2.0 }
    }
}

/// Path indices of the waypoints, by cumulative travel along the path.
/// The last path cell is always included; the first only for a 1-cell path.
pub fn decompose_indices(path: &[Cell], spec: &GridSpec, params: &WaypointParams, fine_prefix: bool) -> Vec<usize> {
    if path.len() <= 1 {
        return if path.is_empty() { vec![] } else { vec![0] };
    }
    let interval = |travelled: f64| {
        let steps = if fine_prefix && travelled < params.fine_prefix_m - 1e-9 { params.n_block } else { params.n_waypoint };
        steps.max(1) as f64 * MOVE_STEP
    };
    let mut out = Vec::new();
    let mut cum = 0.0;
    let mut next = interval(0.0);
    for k in 1..path.len() {
        cum += spec.center(path[k - 1]).distance(spec.center(path[k]));
        if cum >= next - 1e-9 {
            out.push(k);
            next = cum + interval(cum);
        }
    }
    if out.last() != Some(&(path.len() - 1)) {
        out.push(path.len() - 1);
    }
    out
}

pub fn decompose_waypoints(path: &[Cell], spec: &GridSpec, params: &WaypointParams, fine_prefix: bool) -> Vec<Point2> {
    decompose_indices(path, spec, params, fine_prefix).into_iter().map(|k| spec.center(path[k])).collect()
}

/// Whether the straight segment stays on passable cells.
pub fn line_of_sight(map: &AffordanceMap, a: Point2, b: Point2) -> bool {
    let spec = map.spec();
    let len = a.distance(b);
    let n = ((len / (0.25 * spec.resolution)).ceil() as usize).max(1);
    (0..=n).all(|s| {
        let t = s as f64 / n as f64;
        let p = Point2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
        spec.cell_of(p).is_some_and(|c| map.passable(c))
    })
}

/// Insert path cells so each consecutive pair of waypoints (starting from
/// the path's first cell) has a clear straight line.
pub fn refine_line_of_sight(map: &AffordanceMap, path: &[Cell], indices: &[usize]) -> Vec<usize> {
    let spec = map.spec();
    let at = |k: usize| spec.center(path[k]);
    let mut out = Vec::with_capacity(indices.len());
    let mut prev = 0usize;
    for &target in indices {
        while target > prev + 1 && !line_of_sight(map, at(prev), at(target)) {
            let k = (prev + 1..target).rev().find(|&k| line_of_sight(map, at(prev), at(k))).unwrap_or(prev + 1);
            out.push(k);
            prev = k;
        }
        if target != prev || out.is_empty() {
            out.push(target);
        }
        prev = target;
    }
    out
}

/// Primitive actions carrying the agent from `pose` to `waypoint`.
///
/// The displacement is split along the two turn-lattice bearings that
/// bracket it (a single leg when it lies on one), each leg being a turn
/// toward its bearing followed by the rounded number of forward steps. The
/// leg needing fewer turns goes first. Rounding both legs keeps the end
/// point within one step length of the waypoint.
pub fn compile_actions(pose: &AgentPose, waypoint: Point2) -> Vec<Action> {
    let dx = waypoint.x - pose.position.x;
    let dy = waypoint.y - pose.position.y;
    let step = TURN_STEP as f64;
    let bearing = dy.atan2(dx).to_degrees();
    let lo = (bearing / step).floor() * step;
    let rem = bearing - lo;
    let legs: Vec<(f64, usize)> = if rem < 1e-9 || step - rem < 1e-9 {
        vec![((bearing / step).round() * step, ((dx.hypot(dy)) / MOVE_STEP).round() as usize)]
    } else {
        let (u1, u2) = (lo.to_radians(), (lo + step).to_radians());
        let det = u1.cos() * u2.sin() - u1.sin() * u2.cos();
        let a = (dx * u2.sin() - dy * u2.cos()) / det;
        let b = (u1.cos() * dy - u1.sin() * dx) / det;
        vec![(lo, (a / MOVE_STEP).round() as usize), (lo + step, (b / MOVE_STEP).round() as usize)]
    };
    let mut legs: Vec<(f64, usize)> = legs.into_iter().filter(|l| l.1 > 0).collect();
    let turns_from = |yaw: f64, to: f64| (angle_diff_degrees(yaw, to).abs() / step).round() as usize;
    if legs.len() == 2 {
        let t0 = turns_from(pose.yaw as f64, legs[0].0);
        let t1 = turns_from(pose.yaw as f64, legs[1].0);
        if t1 < t0 || (t1 == t0 && legs[1].1 > legs[0].1) {
            legs.swap(0, 1);
        }
    }
    let mut out = Vec::new();
    let mut yaw = pose.yaw as f64;
    for (dir, n) in legs {
        let diff = angle_diff_degrees(yaw, dir);
        let turn = if diff > 0.0 { Action::RotateRight } else { Action::RotateLeft };
        out.extend(std::iter::repeat_n(turn, (diff.abs() / step).round() as usize));
        out.extend(std::iter::repeat_n(Action::MoveAhead, n));
        yaw = dir;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{scripted, step};

    fn spec() -> GridSpec {
        GridSpec { origin: Point2::new(0.0, 0.0), resolution: 0.05, width: 200, height: 200 }
    }

    fn straight(n: usize) -> Vec<Cell> {
        (0..=n).map(|i| (i, 10)).collect()
    }

    #[test]
    fn single_cell_path() {
        assert_eq!(decompose_indices(&[(3, 4)], &spec(), &WaypointParams::default(), false), vec![0]);
    }

    #[test]
    fn standard_spacing_counts_motion_steps() {
        // 16 motion steps = 4 m = 80 cells.
        let p = straight(80);
        assert_eq!(decompose_indices(&p, &spec(), &WaypointParams::default(), false), vec![40, 80]);
    }

    #[test]
    fn fine_prefix_then_standard() {
        // 6 m: every 0.5 m over the first 2 m, then every 2 m.
        let p = straight(120);
        let idx = decompose_indices(&p, &spec(), &WaypointParams::default(), true);
        assert_eq!(idx, vec![10, 20, 30, 40, 80, 120]);
    }

    #[test]
    fn line_of_sight_inserts_corner() {
        let s = GridSpec { origin: Point2::new(0.0, 0.0), resolution: 0.05, width: 20, height: 20 };
        let mut a = vec![1.0; s.len()];
        // Block the lower-right quadrant so an L-shaped path must turn at (2, 17).
        for i in 5..20 {
            for j in 0..15 {
                a[s.index((i, j))] = 0.0;
            }
        }
        let map = AffordanceMap::from_final(s, a);
        let mut path: Vec<Cell> = (0..=17).map(|j| (2, j)).collect();
        path.extend((3..=18).map(|i| (i, 17)));
        let idx = refine_line_of_sight(&map, &path, &[path.len() - 1]);
        assert_eq!(*idx.last().unwrap(), path.len() - 1);
        let mut prev = s.center(path[0]);
        for k in idx {
            assert!(line_of_sight(&map, prev, s.center(path[k])));
            prev = s.center(path[k]);
        }
    }

    #[test]
    fn compile_straight_left_and_here() {
        let pose = AgentPose::new(Point2::new(1.0, 1.0), 0);
        assert_eq!(compile_actions(&pose, Point2::new(2.0, 1.0)), vec![Action::MoveAhead; 4]);
        // Three left turns from yaw 0 face yaw 270, i.e. heading (0, -1).
        let left = compile_actions(&pose, Point2::new(1.0, 0.0));
        assert_eq!(&left[..3], &[Action::RotateLeft; 3]);
        assert!(left[3..].iter().all(|a| *a == Action::MoveAhead));
        assert!(compile_actions(&pose, Point2::new(1.05, 1.05)).is_empty());
        let behind = compile_actions(&pose, Point2::new(0.0, 1.0));
        assert_eq!(&behind[..6], &[Action::RotateRight; 6]);
    }

    #[test]
    fn compiled_script_lands_near_waypoint() {
        let scene = scripted::empty_room(10.0, 10.0);
        for (k, wp) in [(3.0, 7.0), (8.1, 4.9), (2.2, 2.4), (6.0, 5.0)].iter().enumerate() {
            let mut pose = AgentPose::new(Point2::new(5.0, 5.0), 30 * k as i32);
            let wp = Point2::new(wp.0, wp.1);
            for a in compile_actions(&pose, wp) {
                let (next, fb) = step(&scene, &pose, a);
                assert!(fb.is_success());
                pose = next;
            }
            let d = pose.position.distance(wp);
            assert!(d <= MOVE_STEP, "ended {d} m from the waypoint");
        }
    }
}
