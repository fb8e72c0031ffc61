//! The dual-tempo episode loop.
//!
//! Each slow phase senses a panorama, updates memory, asks the backend for
//! a target and navigates to it segment by segment on a fresh affordance
//! map, re-sensing after every segment. Reaching an object hands over to
//! the scripted specialist for a short fast burst; its `Done` triggers the
//! status update. Failed moves feed the corrector when it is enabled.

mod specialist;
mod trace;

pub use specialist::{check_success, fast_tempo_specialist, turn_toward};
pub use trace::{
    header, parse_trace, replay, steps, write_trace, CorrectionRecord, DecisionKind, DecisionRecord, EndReason,
    EndRecord, ReplayError, StepRecord, Tempo, TraceError, TraceHeader, TraceRecord, TRACE_SCHEMA_VERSION,
};

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::Task;
use crate::corrector::{correction_cause, record_failure, CorrectionCause, CorrectionState, CorrectorConfig};
use crate::decision::{
    update_status, DecisionBackend, DecisionError, ExtraInfo, FrontierCandidate, LocateContext, LocateDecision,
    ObservedObject, StatusContext, Subtask,
};
use crate::geometry::{angle_diff_degrees, Point2};
use crate::masmap::{record_target, MemoryBank, MemoryParams};
use crate::planner::{
    compile_actions, plan, reachable_mask, AffordanceMap, Cell, FrontierParams, ObservedMap, Plan, PlannerParams,
    WaypointParams,
};
use crate::scene::{step, Action, AgentPose, NoiseConfig, Observation, Scene, SensorConfig, StepFeedback, TURN_STEP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepCounting {
    /// Every primitive action counts.
    Primitive,
    /// Each navigation segment and each fast-tempo action counts once.
    Waypoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub eps_dis: f64,
    pub len_max: usize,
    pub n_tolerance: usize,
    pub tau_obs: f64,
    pub slow_interval: usize,
    pub burst_len: usize,
    pub step_counting: StepCounting,
    /// Seed for perception noise.
    pub seed: u64,
    /// Navigation to an object stops this much inside the success radius.
    pub approach_margin: f64,
    pub frontier_goal_radius: f64,
    pub frontier: FrontierParams,
    /// Plan through never-observed space as if it were free.
    pub optimistic_unknown: bool,
    pub corrector: CorrectorConfig,
    pub planner: PlannerParams,
    pub sensor: SensorConfig,
    pub noise: NoiseConfig,
    pub memory: MemoryParams,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            eps_dis: 1.5,
            len_max: 50,
            n_tolerance: 2,
            tau_obs: 0.25,
            slow_interval: 12,
            burst_len: 6,
            step_counting: StepCounting::Primitive,
            seed: 0,
            approach_margin: 0.5,
            frontier_goal_radius: 0.5,
            frontier: FrontierParams::default(),
            optimistic_unknown: true,
            corrector: CorrectorConfig::default(),
            planner: PlannerParams::default(),
            sensor: SensorConfig::default(),
            noise: NoiseConfig::default(),
            memory: MemoryParams::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid episode configuration: {0}")]
pub struct ConfigError(pub String);

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("eps_dis", self.eps_dis),
            ("tau_obs", self.tau_obs),
            ("frontier_goal_radius", self.frontier_goal_radius),
            ("planner.resolution", self.planner.resolution),
            ("sensor.range", self.sensor.range),
            ("sensor.hfov_deg", self.sensor.hfov_deg),
            ("sensor.depth_spacing", self.sensor.depth_spacing),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(ConfigError(format!("{name} must be positive")));
        }
        let non_negative = [
            ("approach_margin", self.approach_margin),
            ("frontier.explained_radius", self.frontier.explained_radius),
            ("frontier.min_pocket_area", self.frontier.min_pocket_area),
            ("planner.dilation_radius", self.planner.dilation_radius),
        ];
        if let Some((name, _)) = non_negative.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(ConfigError(format!("{name} must be non-negative")));
        }
        if self.approach_margin >= self.eps_dis {
            return Err(ConfigError("approach_margin must be below eps_dis".into()));
        }
        if self.n_tolerance == 0 || self.slow_interval == 0 || self.sensor.views == 0 {
            return Err(ConfigError("n_tolerance, slow_interval and sensor.views must be at least 1".into()));
        }
        let w = &self.planner.waypoints;
        if w.n_block == 0 || w.n_block >= w.n_waypoint {
            return Err(ConfigError("waypoint spacing needs 0 < n_block < n_waypoint".into()));
        }
        let n = &self.noise;
        if ![n.drop, n.mislabel].iter().all(|p| (0.0..=1.0).contains(p)) || !(n.jitter.is_finite() && n.jitter >= 0.0) {
            return Err(ConfigError("noise probabilities must lie in [0, 1] and jitter must be non-negative".into()));
        }
        Ok(())
    }

    /// Hard limit on primitive actions, which bounds waypoint-counted episodes too.
    fn action_cap(&self) -> usize {
        match self.step_counting {
            StepCounting::Primitive => self.len_max,
            StepCounting::Waypoints => self.len_max.saturating_mul(64),
        }
    }
}

/// Per-subtask bookkeeping for the path-length metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskOutcome {
    pub success: bool,
    /// Where the agent stood when this subtask became the active one.
    pub activation: Point2,
    /// Meters traveled from activation to completion (or to the episode end).
    pub actual_length: f64,
    pub completion_step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub task_id: String,
    pub scene_id: String,
    pub subtasks: Vec<SubtaskOutcome>,
    /// Backend status list at the end.
    pub status: Vec<bool>,
    /// Primitive actions executed.
    pub actions: usize,
    /// Budget consumed under the configured step counting.
    pub budget: usize,
    pub reason: EndReason,
    pub final_pose: AgentPose,
    pub trace: Vec<TraceRecord>,
}

impl EpisodeOutcome {
    pub fn success_flags(&self) -> Vec<bool> {
        self.subtasks.iter().map(|s| s.success).collect()
    }

    pub fn all_success(&self) -> bool {
        !self.subtasks.is_empty() && self.subtasks.iter().all(|s| s.success)
    }

    pub fn aborted(&self) -> bool {
        matches!(self.reason, EndReason::Aborted(_))
    }
}

enum Cycle {
    Reached,
    Failed,
    Interrupted,
    Unreachable,
    OutOfBudget,
}

struct Episode<'a> {
    scene: &'a Scene,
    task: &'a Task,
    cfg: &'a EpisodeConfig,
    backend: &'a dyn DecisionBackend,
    rng: ChaCha8Rng,
    pose: AgentPose,
    bank: MemoryBank,
    observed: ObservedMap,
    trace: Vec<TraceRecord>,
    actions: usize,
    budget: usize,
    traveled: f64,
    recent_moves: Vec<AgentPose>,
    subtasks: Vec<Subtask>,
    status: Vec<bool>,
    outcomes: Vec<SubtaskOutcome>,
    last_event: (Point2, f64),
    last_seen: Vec<ObservedObject>,
    pending_extra: Option<ExtraInfo>,
    correction: CorrectionState,
    /// Object target whose last arrival the specialist could not confirm.
    unconfirmed: Option<Point2>,
    nav_target: Option<Point2>,
    /// Planning toward `nav_target` has fallen back to bare clearance.
    relaxed: bool,
    /// Forward moves that failed, by start cell and heading.
    blocked_moves: BTreeSet<(Cell, i32)>,
}

/// Run one episode to completion. Backend failures end it early with an
/// `Aborted` reason rather than an error, so benchmarks keep going.
pub fn run_episode(scene: &Scene, task: &Task, cfg: &EpisodeConfig, backend: &dyn DecisionBackend) -> EpisodeOutcome {
    let spawn = scene.spawns.get(task.spawn_index).copied().unwrap_or_else(|| {
        log::warn!("task {} names spawn {} but the scene has {}", task.id, task.spawn_index, scene.spawns.len());
        scene.spawns.first().copied().unwrap_or(AgentPose::new(scene.bounds.center(), 0))
    });
    let mut ep = Episode {
        scene,
        task,
        cfg,
        backend,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        pose: spawn,
        bank: MemoryBank::default(),
        observed: ObservedMap::new(scene.bounds, cfg.planner.resolution),
        trace: vec![TraceRecord::Header(TraceHeader {
            schema_version: TRACE_SCHEMA_VERSION,
            scene_id: scene.id.clone(),
            task_id: task.id.clone(),
            backend: backend.name().to_string(),
            instruction: task.instruction.clone(),
            spawn,
            config: cfg.clone(),
        })],
        actions: 0,
        budget: 0,
        traveled: 0.0,
        recent_moves: Vec::new(),
        subtasks: Vec::new(),
        status: Vec::new(),
        outcomes: task
            .subtasks
            .iter()
            .map(|_| SubtaskOutcome { success: false, activation: spawn.position, actual_length: 0.0, completion_step: None })
            .collect(),
        last_event: (spawn.position, 0.0),
        last_seen: Vec::new(),
        pending_extra: None,
        correction: CorrectionState::default(),
        unconfirmed: None,
        nav_target: None,
        relaxed: false,
        blocked_moves: BTreeSet::new(),
    };
    let reason = ep.run();
    ep.finish(reason)
}

impl Episode<'_> {
    fn run(&mut self) -> EndReason {
        match self.backend.break_instruction(&self.task.instruction, &self.task.subtasks) {
            Ok((subtasks, status)) => {
                self.subtasks = subtasks;
                self.status = status;
            }
            Err(e) => return EndReason::Aborted(e.to_string()),
        }
        self.bank.subtask_status = self.status.clone();
        self.decision(DecisionKind::Break { subtasks: self.subtasks.clone(), status: self.status.clone() });
        loop {
            if self.all_complete() {
                return EndReason::AllComplete;
            }
            if self.out_of_budget() {
                return EndReason::BudgetExhausted;
            }
            let before = (self.actions, self.status.clone());
            self.sense();
            let decision = match self.locate() {
                Ok(Some(d)) => d,
                Ok(None) => return EndReason::NoCandidates,
                Err(e) => return EndReason::Aborted(e.to_string()),
            };
            match self.navigate(&decision) {
                Cycle::Reached => {
                    if !decision.is_frontier() {
                        self.face(decision.target_position);
                        if self.burst(true, &decision) {
                            self.unconfirmed = None;
                        } else {
                            self.unconfirmed = Some(decision.target_position);
                            self.fail_target(&decision, StepFeedback::Other("Unconfirmed".into()), None);
                        }
                    }
                }
                Cycle::Interrupted | Cycle::Failed | Cycle::Unreachable | Cycle::OutOfBudget => {
                    if self.pose.position.distance(decision.target_position) <= self.cfg.eps_dis {
                        self.burst(true, &decision);
                    }
                }
            }
            // A cycle that moved nothing still has to spend budget.
            if before == (self.actions, self.status.clone()) {
                self.burst(false, &decision);
                if before.0 == self.actions {
                    return EndReason::BudgetExhausted;
                }
            }
        }
    }

    fn finish(mut self, reason: EndReason) -> EpisodeOutcome {
        for o in self.outcomes.iter_mut().filter(|o| o.completion_step.is_none()) {
            o.activation = self.last_event.0;
            o.actual_length = self.traveled - self.last_event.1;
        }
        let success: Vec<bool> = self.outcomes.iter().map(|o| o.success).collect();
        self.trace.push(TraceRecord::End(EndRecord {
            actions: self.actions,
            budget: self.budget,
            reason: reason.clone(),
            status: self.status.clone(),
            success,
            pose: self.pose,
        }));
        EpisodeOutcome {
            task_id: self.task.id.clone(),
            scene_id: self.scene.id.clone(),
            subtasks: self.outcomes,
            status: self.status,
            actions: self.actions,
            budget: self.budget,
            reason,
            final_pose: self.pose,
            trace: self.trace,
        }
    }

    fn all_complete(&self) -> bool {
        !self.status.is_empty() && self.status.iter().all(|s| *s)
    }

    fn out_of_budget(&self) -> bool {
        self.budget >= self.cfg.len_max || self.actions >= self.cfg.action_cap()
    }

    fn decision(&mut self, kind: DecisionKind) {
        self.trace.push(TraceRecord::Decision(DecisionRecord { step: self.actions, kind }));
    }

    fn sense(&mut self) {
        let obs = Observation::capture(self.scene, &self.pose, &self.cfg.sensor, &self.cfg.noise, &mut self.rng);
        self.observed.integrate(&obs.depth, &self.cfg.planner.heights);
        self.bank.ingest(&obs.objects, &self.cfg.memory);
        self.last_seen = obs
            .objects
            .iter()
            .filter_map(|d| {
                let c = d.footprint()?.center();
                Some(ObservedObject { class: d.class.clone(), position: c, distance: c.distance(self.pose.position) })
            })
            .collect();
    }

    fn act(&mut self, action: Action, tempo: Tempo) -> StepFeedback {
        let (next, fb) = step(self.scene, &self.pose, action);
        self.actions += 1;
        let counts = match self.cfg.step_counting {
            StepCounting::Primitive => true,
            StepCounting::Waypoints => tempo == Tempo::Fast,
        };
        if counts {
            self.budget += 1;
        }
        self.traveled += next.position.distance(self.pose.position);
        self.pose = next;
        if action == Action::MoveAhead && fb.is_success() {
            self.recent_moves.push(next);
            if self.recent_moves.len() > self.cfg.corrector.loop_window.max(1) {
                self.recent_moves.remove(0);
            }
        }
        self.trace.push(TraceRecord::Step(StepRecord {
            step: self.actions,
            tempo,
            action,
            feedback: fb.clone(),
            pose: next,
            budget: self.budget,
        }));
        fb
    }

    fn planning_map(&self, target: Point2, tau_obs: f64) -> AffordanceMap {
        let grid = self.observed.grid(
            self.cfg.planner.dilation_radius,
            self.cfg.corrector.persist_obstacles,
            self.cfg.optimistic_unknown.then_some(&self.cfg.frontier),
        );
        AffordanceMap::compute(grid, target, tau_obs)
    }

    /// Frontiers reachable under the clearance margin, or failing that,
    /// under bare agent-radius clearance.
    fn frontiers(&self) -> Vec<FrontierCandidate> {
        let mut found = Vec::new();
        for tau in [self.cfg.tau_obs, 0.0] {
            let map = self.planning_map(self.pose.position, tau);
            let mask = match map.start_cell(self.pose.position) {
                Some(c) => reachable_mask(&map, c),
                None => vec![false; map.spec().len()],
            };
            found = self.observed.frontiers(&mask, &self.cfg.frontier, self.cfg.frontier_goal_radius);
            if !found.is_empty() {
                break;
            }
        }
        found.into_iter().map(|f| FrontierCandidate { position: f.position, size: f.size }).collect()
    }

    fn locate(&mut self) -> Result<Option<LocateDecision>, DecisionError> {
        let frontiers = self.frontiers();
        let mut extra = self.pending_extra.take();
        loop {
            let ctx = LocateContext {
                instruction: &self.task.instruction,
                subtasks: &self.subtasks,
                status: &self.status,
                bank: &self.bank,
                agent: self.pose.position,
                extra_info: extra.as_ref(),
                frontiers: &frontiers,
            };
            let result = self.backend.locate_next(&ctx);
            self.decision(DecisionKind::Locate {
                decision: result.as_ref().ok().cloned(),
                extra_info: extra.clone(),
                frontiers: frontiers.len(),
                error: result.as_ref().err().map(|e| e.to_string()),
            });
            match result {
                Ok(d) => return Ok(Some(d)),
                // Excluding the only candidate must not end the episode.
                Err(DecisionError::NoCandidates) if extra.is_some() => extra = None,
                Err(DecisionError::NoCandidates) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
    }

    fn fail_target(&mut self, d: &LocateDecision, feedback: StepFeedback, cause: Option<CorrectionCause>) -> bool {
        record_target(&mut self.bank, &d.target_object, d.target_position, feedback);
        let exceeded = self.cfg.corrector.enabled && self.bank.consecutive_failures >= self.cfg.n_tolerance;
        let extra = exceeded.then(|| ExtraInfo { object: d.target_object.clone(), position: d.target_position });
        if let Some(cause) = cause {
            self.trace.push(TraceRecord::Correction(CorrectionRecord {
                step: self.actions,
                cause,
                pose: self.pose,
                target: d.target_object.clone(),
                consecutive_failures: self.bank.consecutive_failures,
                extra_info: extra.clone(),
            }));
        }
        if extra.is_some() {
            self.pending_extra = extra;
        }
        exceeded
    }

    /// Path cell to aim for: the farthest one up to the first waypoint at
    /// least a step away whose compiled script is nonempty and predicted to
    /// stay on passable cells.
    /// One lattice step from the current pose toward `cell`, preferring
    /// steps that stay off obstacle cells, avoid moves already seen to
    /// fail, and shorten the free path to `cell`.
    fn local_step(&self, map: &AffordanceMap, cell: Cell) -> Point2 {
        let spec = map.spec();
        let here = self.pose.position;
        let goal = spec.center(cell);
        let from = spec.cell_of(here);
        let blocked = |q: Point2| spec.cell_of(q).is_none_or(|c| map.grid.is_obstacle(c)) as usize;
        let dist = map.free_distance(cell);
        let along = |q: Point2| spec.cell_of(q).map_or(u32::MAX, |c| dist[spec.index(c)]);
        (0..360 / TURN_STEP)
            .map(|k| {
                let yaw = k * TURN_STEP;
                let (sin, cos) = (yaw as f64).to_radians().sin_cos();
                let at = |t: f64| Point2::new(here.x + t * cos, here.y + t * sin);
                let (end, mid) = (at(crate::scene::MOVE_STEP), at(0.5 * crate::scene::MOVE_STEP));
                let failed = from.is_some_and(|c| self.blocked_moves.contains(&(c, yaw)));
                (2 * failed as usize + blocked(mid) + blocked(end), along(end), end.distance(goal), end)
            })
            .min_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)))
            .map_or(goal, |best| best.3)
    }

    fn segment_goal(&self, map: &AffordanceMap, p: &Plan) -> Point2 {
        let spec = map.spec();
        let near = 0.5 * crate::scene::MOVE_STEP;
        // Inside the obstacle margin: get back onto passable ground first.
        if spec.cell_of(self.pose.position) != Some(p.start) && spec.center(p.start).distance(self.pose.position) >= near {
            return self.local_step(map, p.start);
        }
        let w = p
            .waypoints
            .iter()
            .position(|w| w.distance(self.pose.position) >= crate::scene::MOVE_STEP)
            .unwrap_or(p.waypoints.len() - 1);
        for k in (1..=p.waypoint_indices[w]).rev() {
            let goal = spec.center(p.path[k]);
            if goal.distance(self.pose.position) < near {
                break;
            }
            let script = compile_actions(&self.pose, goal);
            if !script.is_empty() && predicted_clear(map, &self.pose, &script, &self.blocked_moves) {
                return goal;
            }
        }
        // Nothing on the path is reachable by a clean script.
        self.local_step(map, p.path[p.waypoint_indices[w]])
    }

    /// Evidence from a blocked forward move at the current pose.
    fn note_blocked(&mut self) {
        record_failure(&mut self.observed, &self.pose);
        if let Some(c) = self.observed.spec.cell_of(self.pose.position) {
            self.blocked_moves.insert((c, self.pose.yaw));
        }
    }

    fn navigate(&mut self, d: &LocateDecision) -> Cycle {
        let target = d.target_position;
        let object = !d.is_frontier();
        let (goal_radius, stop_radius) = if object {
            (self.cfg.eps_dis, self.cfg.eps_dis - self.cfg.approach_margin)
        } else {
            (self.cfg.frontier_goal_radius, self.cfg.frontier_goal_radius)
        };
        // Already in range: try to confirm before walking closer.
        if object && self.unconfirmed != Some(target) && self.pose.position.distance(target) <= self.cfg.eps_dis {
            return Cycle::Reached;
        }
        let start_actions = self.actions;
        let mut failed = false;
        // Fine sampling and the clearance fallback survive an interrupted
        // cycle toward the same target.
        if self.nav_target != Some(target) {
            self.correction.reset();
            self.nav_target = Some(target);
            self.relaxed = false;
        }
        let wp: WaypointParams = self.cfg.planner.waypoints;
        loop {
            if self.out_of_budget() {
                return Cycle::OutOfBudget;
            }
            if self.pose.position.distance(target) <= stop_radius {
                break;
            }
            if self.actions - start_actions >= self.cfg.slow_interval {
                return Cycle::Interrupted;
            }
            // Narrow gaps the margin closes are still wide enough for the agent.
            let taus: &[f64] = if self.relaxed { &[0.0] } else { &[self.cfg.tau_obs, 0.0] };
            let planned = taus.iter().find_map(|&tau| {
                let map = self.planning_map(target, tau);
                plan(&map, self.pose.position, target, goal_radius, &wp, self.correction.active).ok().map(|p| (tau, map, p))
            });
            let Some((tau, map, p)) = planned else {
                log::debug!("no plan to {} at {:?}", d.target_object, target);
                self.fail_target(d, StepFeedback::Obstructed, None);
                return Cycle::Unreachable;
            };
            self.relaxed |= tau == 0.0;
            let script = if p.path.len() > 1 { compile_actions(&self.pose, self.segment_goal(&map, &p)) } else { Vec::new() };
            if script.is_empty() {
                // The planner may snap the start onto a neighbor cell; only
                // count this as arrival when the agent really is in range.
                if self.pose.position.distance(target) <= goal_radius {
                    break;
                }
                self.fail_target(d, StepFeedback::Other("Stuck".into()), None);
                return Cycle::Unreachable;
            }
            if self.cfg.step_counting == StepCounting::Waypoints {
                self.budget += 1;
            }
            let from = self.pose.position;
            let mut replan = false;
            for a in script {
                if self.out_of_budget() {
                    return Cycle::OutOfBudget;
                }
                let fb = self.act(a, Tempo::Slow);
                // Without the corrector the script runs on blindly.
                let cause = if self.cfg.corrector.enabled {
                    correction_cause(&fb, &self.recent_moves, &self.cfg.corrector)
                } else {
                    None
                };
                let Some(cause) = cause else {
                    if object && self.pose.position.distance(target) <= stop_radius {
                        break;
                    }
                    continue;
                };
                failed = true;
                if cause != CorrectionCause::Loop {
                    self.note_blocked();
                }
                self.recent_moves.clear();
                let feedback = if cause == CorrectionCause::Loop { StepFeedback::Other("Loop".into()) } else { fb };
                if self.fail_target(d, feedback.clone(), Some(cause)) {
                    return Cycle::Failed;
                }
                self.correction.note_replan(feedback, &wp);
                replan = true;
                break;
            }
            if !replan && self.correction.active {
                self.correction.consume(from.distance(self.pose.position));
            }
            self.sense();
        }
        if !failed {
            record_target(&mut self.bank, &d.target_object, target, StepFeedback::Success);
        }
        Cycle::Reached
    }

    /// Rotate until the heading is the lattice bearing nearest `p`.
    fn face(&mut self, p: Point2) {
        let bearing = (p.y - self.pose.position.y).atan2(p.x - self.pose.position.x).to_degrees();
        let turns = (angle_diff_degrees(self.pose.yaw as f64, bearing).abs() / TURN_STEP as f64).round() as usize;
        for _ in 0..turns {
            if self.out_of_budget() {
                return;
            }
            let a = turn_toward(&self.pose, bearing);
            self.act(a, Tempo::Slow);
        }
    }

    /// Fast-tempo burst; returns whether a subtask was completed.
    fn burst(&mut self, gated: bool, d: &LocateDecision) -> bool {
        if gated && (d.is_frontier() || self.pose.position.distance(d.target_position) > self.cfg.eps_dis + 0.5) {
            return false;
        }
        let complete: Vec<bool> = self.outcomes.iter().map(|o| o.completion_step.is_some()).collect();
        for _ in 0..self.cfg.burst_len {
            if self.out_of_budget() || self.all_complete() {
                return false;
            }
            let a = fast_tempo_specialist(
                self.scene,
                &self.pose,
                &self.task.subtasks,
                &complete,
                &self.cfg.sensor,
                self.cfg.eps_dis,
            );
            let fb = self.act(a, Tempo::Fast);
            if a == Action::Done {
                return self.on_done();
            }
            if !fb.is_success() {
                if self.cfg.corrector.enabled && a == Action::MoveAhead {
                    self.note_blocked();
                }
                return false;
            }
        }
        false
    }

    fn on_done(&mut self) -> bool {
        let ctx = StatusContext {
            instruction: &self.task.instruction,
            subtasks: &self.subtasks,
            status: &self.status,
            bank: &self.bank,
            observation: &self.last_seen,
            action: Action::Done,
            agent: &self.pose,
            scene: self.scene,
        };
        let d = update_status(self.backend, &ctx);
        self.decision(DecisionKind::Status { decision: d.clone() });
        let Some(k) = d.completed_subtask.filter(|k| !self.status[*k] && d.updated_status[*k]) else {
            return false;
        };
        self.status = d.updated_status;
        self.bank.subtask_status = self.status.clone();
        if let Some(o) = self.outcomes.get_mut(k) {
            o.success = check_success(self.scene, &self.pose, &self.task.subtasks[k], self.cfg.eps_dis);
            o.activation = self.last_event.0;
            o.actual_length = self.traveled - self.last_event.1;
            o.completion_step = Some(self.actions);
        }
        self.last_event = (self.pose.position, self.traveled);
        true
    }
}

/// Whether the kinematic prediction of `script` stays on passable cells,
/// ignoring the cells right around the start where the agent already is.
fn predicted_clear(map: &AffordanceMap, pose: &AgentPose, script: &[Action], blocked: &BTreeSet<(Cell, i32)>) -> bool {
    let spec = map.spec();
    let start = pose.position;
    let mut p = *pose;
    let ok = |q: Point2| q.distance(start) < spec.resolution * 2.0 || spec.cell_of(q).is_some_and(|c| map.passable(c));
    for a in script {
        match a {
            Action::RotateLeft | Action::RotateRight => p.yaw = (p.yaw + if *a == Action::RotateRight { TURN_STEP } else { -TURN_STEP }).rem_euclid(360),
            Action::MoveAhead => {
                if spec.cell_of(p.position).is_some_and(|c| blocked.contains(&(c, p.yaw))) {
                    return false;
                }
                let h = p.heading();
                let next = Point2::new(p.position.x + crate::scene::MOVE_STEP * h.x, p.position.y + crate::scene::MOVE_STEP * h.y);
                let mid = Point2::new(0.5 * (p.position.x + next.x), 0.5 * (p.position.y + next.y));
                if !ok(mid) || !ok(next) {
                    return false;
                }
                p.position = next;
            }
            _ => {}
        }
    }
    true
}
