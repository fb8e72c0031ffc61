//! Feedback-driven error correction: failure detection, collision evidence
//! and replanning with a finely sampled initial segment.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::planner::{plan, AffordanceMap, ObservedMap, Plan, PlannerError, WaypointParams};
use crate::scene::{AgentPose, StepFeedback, AGENT_RADIUS, MOVE_STEP};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectorConfig {
    pub enabled: bool,
    /// Number of most recent forward-move poses inspected for loops.
    pub loop_window: usize,
    /// A full window with at most this many distinct cells is a loop.
    pub loop_max_distinct: usize,
    /// Cell size used to compare loop poses, meters.
    pub loop_cell: f64,
    /// Keep obstacles from earlier sweeps when replanning.
    pub persist_obstacles: bool,
}

impl Default for CorrectorConfig {
    fn default() -> Self {
        Self { enabled: true, loop_window: 6, loop_max_distinct: 2, loop_cell: 0.05, persist_obstacles: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionCause {
    Collision,
    OutOfBounds,
    Loop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionState {
    pub active: bool,
    pub replan_count: usize,
    pub last_feedback: StepFeedback,
    /// Meters of the current path still sampled finely.
    pub fine_budget: f64,
}

impl Default for CorrectionState {
    fn default() -> Self {
        Self { active: false, replan_count: 0, last_feedback: StepFeedback::Success, fine_budget: 0.0 }
    }
}

impl CorrectionState {
    /// Start a fresh attempt on a new target.
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn note_replan(&mut self, feedback: StepFeedback, params: &WaypointParams) {
        self.active = true;
        self.replan_count += 1;
        self.last_feedback = feedback;
        self.fine_budget = params.fine_prefix_m;
    }

    pub fn consume(&mut self, meters: f64) {
        self.fine_budget = (self.fine_budget - meters).max(0.0);
        if self.fine_budget == 0.0 {
            self.active = false;
        }
    }
}

fn loop_cell(p: Point2, cell: f64) -> (i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
}

/// Whether the last `window` forward-move poses revisit at most `max_distinct` cells.
pub fn is_loop(recent_poses: &[AgentPose], cfg: &CorrectorConfig) -> bool {
    if cfg.loop_window == 0 || recent_poses.len() < cfg.loop_window {
        return false;
    }
    let tail = &recent_poses[recent_poses.len() - cfg.loop_window..];
    let cells: BTreeSet<_> = tail.iter().map(|p| loop_cell(p.position, cfg.loop_cell)).collect();
    cells.len() <= cfg.loop_max_distinct
}

pub fn should_correct(feedback: &StepFeedback, recent_poses: &[AgentPose], cfg: &CorrectorConfig) -> bool {
    correction_cause(feedback, recent_poses, cfg).is_some()
}

pub fn correction_cause(
    feedback: &StepFeedback,
    recent_poses: &[AgentPose],
    cfg: &CorrectorConfig,
) -> Option<CorrectionCause> {
    match feedback {
        StepFeedback::Obstructed => Some(CorrectionCause::Collision),
        StepFeedback::OutOfBounds => Some(CorrectionCause::OutOfBounds),
        _ if is_loop(recent_poses, cfg) => Some(CorrectionCause::Loop),
        _ => None,
    }
}

/// Evidence left by a blocked forward move: a segment half as wide as the
/// agent, across the middle of the sweep it could not make. Planning dilates
/// it by the agent radius again.
pub fn contact_points(pose: &AgentPose, resolution: f64) -> Vec<Point2> {
    let h = pose.heading();
    let perp = Point2::new(-h.y, h.x);
    let reach = AGENT_RADIUS + 0.5 * MOVE_STEP;
    let c = Point2::new(pose.position.x + h.x * reach, pose.position.y + h.y * reach);
    let n = (0.5 * AGENT_RADIUS / resolution).round() as i64;
    (-n..=n)
        .map(|k| {
            let s = k as f64 * resolution;
            Point2::new(c.x + perp.x * s, c.y + perp.y * s)
        })
        .collect()
}

/// True when mapped solids or earlier evidence already reach into the sweep
/// of a forward move from `pose`.
pub fn sweep_explained(map: &ObservedMap, pose: &AgentPose) -> bool {
    let spec = map.spec;
    let h = pose.heading();
    let (a, b) = (pose.position, Point2::new(pose.position.x + h.x * MOVE_STEP, pose.position.y + h.y * MOVE_STEP));
    let reach = AGENT_RADIUS + spec.resolution;
    let near = |c: Point2| {
        let t = ((c.x - a.x) * h.x + (c.y - a.y) * h.y).clamp(0.0, MOVE_STEP);
        c.distance(Point2::new(a.x + h.x * t, a.y + h.y * t)) <= reach
    };
    let lo = spec.nearest_cell(Point2::new(a.x.min(b.x) - reach, a.y.min(b.y) - reach));
    let hi = spec.nearest_cell(Point2::new(a.x.max(b.x) + reach, a.y.max(b.y) + reach));
    (lo.1..=hi.1).any(|j| (lo.0..=hi.0).any(|i| map.is_blocked((i, j)) && near(spec.center((i, j)))))
}

/// Record a failed move as obstacle evidence in the episode map, unless the
/// map already accounts for it. Returns whether evidence was added.
pub fn record_failure(map: &mut ObservedMap, pose: &AgentPose) -> bool {
    if sweep_explained(map, pose) {
        return false;
    }
    let pts = contact_points(pose, map.spec.resolution);
    map.add_contact(&pts);
    true
}

/// Replan from the current pose on a freshly computed affordance map,
/// sampling the initial segment finely.
pub fn replan(
    map: &AffordanceMap,
    pose: &AgentPose,
    target: Point2,
    goal_radius: f64,
    params: &WaypointParams,
) -> Result<Plan, PlannerError> {
    plan(map, pose.position, target, goal_radius, params, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{AffordanceMap, FrontierParams, HeightThresholds};
    use crate::scene::{scripted, sense_depth, step, Action, SensorConfig};
    use crate::geometry::{Point3, Rect};

    fn pose_at(x: f64, y: f64) -> AgentPose {
        AgentPose::new(Point2::new(x, y), 0)
    }

    #[test]
    fn triggers() {
        let cfg = CorrectorConfig::default();
        assert!(should_correct(&StepFeedback::Obstructed, &[], &cfg));
        assert!(should_correct(&StepFeedback::OutOfBounds, &[], &cfg));
        let distinct: Vec<_> = (0..6).map(|k| pose_at(k as f64 * 0.25, 0.0)).collect();
        assert!(!should_correct(&StepFeedback::Success, &distinct, &cfg));
        let alternating: Vec<_> = (0..6).map(|k| pose_at((k % 2) as f64 * 0.25, 0.0)).collect();
        assert!(should_correct(&StepFeedback::Success, &alternating, &cfg));
        // A partial window never counts.
        assert!(!should_correct(&StepFeedback::Success, &alternating[..5], &cfg));
    }

    #[test]
    fn fine_budget_never_negative() {
        let mut s = CorrectionState::default();
        let p = WaypointParams::default();
        s.note_replan(StepFeedback::Obstructed, &p);
        assert_eq!(s.replan_count, 1);
        s.consume(1.5);
        assert!(s.active);
        s.consume(1.5);
        assert_eq!(s.fine_budget, 0.0);
        assert!(!s.active);
    }

    fn affordance(obs: &ObservedMap, target: Point2) -> AffordanceMap {
        AffordanceMap::compute(obs.grid(0.2, true, Some(&FrontierParams::default())), target, 0.25)
    }

    fn execute(scene: &crate::scene::Scene, start: AgentPose, plan: &Plan) -> (AgentPose, bool) {
        let mut pose = start;
        for wp in &plan.waypoints {
            for a in crate::planner::compile_actions(&pose, *wp) {
                let (next, fb) = step(scene, &pose, a);
                if !fb.is_success() {
                    return (pose, false);
                }
                pose = next;
            }
        }
        (pose, true)
    }

    #[test]
    fn unseen_barrier_is_routed_around_after_contact() {
        let scene = scripted::blocked_corridor(3);
        let sensor = SensorConfig::default();
        let heights = HeightThresholds::default();
        let mut obs = ObservedMap::new(scene.bounds, 0.05);
        let fridge = scene.objects[0].bounds.footprint().center();
        let mut pose = scene.spawns[0];
        let mut collided = false;
        for attempt in 0..8 {
            obs.integrate(&sense_depth(&scene, &pose, &sensor), &heights);
            let map = affordance(&obs, fridge);
            let plan = if attempt == 0 {
                plan(&map, pose.position, fridge, 1.5, &WaypointParams::default(), false)
            } else {
                replan(&map, &pose, fridge, 1.5, &WaypointParams::default())
            }
            .unwrap();
            let (end, ok) = execute(&scene, pose, &plan);
            pose = end;
            if ok {
                break;
            }
            collided = true;
            record_failure(&mut obs, &pose);
        }
        assert!(collided, "the glass must be hit at least once");
        assert!(pose.position.distance(fridge) <= 1.5, "ended at {:?}", pose.position);
        assert!(pose.position.x > 6.05);
    }

    #[test]
    fn mapped_contact_adds_no_evidence() {
        let mut obs = ObservedMap::new(Rect::new(0.0, 0.0, 3.0, 3.0), 0.05);
        obs.integrate(&[Point3::new(1.72, 1.52, 0.8)], &HeightThresholds::default());
        let facing = AgentPose::new(Point2::new(1.3, 1.5), 0);
        assert!(sweep_explained(&obs, &facing));
        assert!(!record_failure(&mut obs, &facing));
        assert_eq!(obs.contact_count(), 0);
        let away = AgentPose::new(Point2::new(1.3, 1.5), 180);
        assert!(record_failure(&mut obs, &away));
        assert!(obs.contact_count() > 0);
        // The new evidence now explains a second hit in the same place.
        assert!(!record_failure(&mut obs, &away));
    }

    #[test]
    fn sealed_target_has_no_path() {
        let scene = scripted::sealed_room();
        let mut obs = ObservedMap::new(scene.bounds, 0.05);
        let mut pose = scene.spawns[0];
        // Sweep in place so every wall around the spawn is seen.
        for _ in 0..12 {
            obs.integrate(&sense_depth(&scene, &pose, &SensorConfig::default()), &HeightThresholds::default());
            pose = step(&scene, &pose, Action::RotateRight).0;
        }
        let safe = scene.objects[0].bounds.footprint().center();
        let map = AffordanceMap::compute(obs.grid(0.2, true, None), safe, 0.25);
        assert_eq!(replan(&map, &pose, safe, 1.5, &WaypointParams::default()).unwrap_err(), PlannerError::NoPath);
    }
}
