//! Episode execution over a task list, optionally in parallel.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;

use super::{shortest_path_length, BenchError, EpisodeResult, SubtaskResult, Task};
use crate::decision::DecisionBackend;
use crate::orchestrator::{run_episode, EpisodeConfig, EpisodeOutcome};
use crate::scene::Scene;

#[derive(Debug, Clone)]
pub struct EpisodeRun {
    pub outcome: EpisodeOutcome,
    pub result: EpisodeResult,
}

/// Score an outcome against the ground truth. Shortest lengths are measured
/// from each subtask's activation point.
pub fn episode_result(scene: &Scene, task: &Task, outcome: &EpisodeOutcome, eps: f64, wall_time_s: f64) -> EpisodeResult {
    let subtasks = task
        .subtasks
        .iter()
        .zip(&outcome.subtasks)
        .map(|(s, o)| {
            let classes: BTreeSet<String> = s.satisfying_classes.iter().cloned().collect();
            let shortest = shortest_path_length(scene, o.activation, &classes, eps).ok();
            SubtaskResult { success: o.success, shortest, actual: o.actual_length }
        })
        .collect();
    EpisodeResult {
        task_id: task.id.clone(),
        scene_id: scene.id.clone(),
        subtasks,
        steps: outcome.budget,
        wall_time_s,
    }
}

/// Run every task once. Episode `i` of repeat `r` is seeded with
/// `cfg.seed + r * tasks.len() + i`, so results do not depend on `threads`
/// (0 picks the pool default). Output order follows `tasks`.
pub fn run_tasks(
    scenes: &[Scene],
    tasks: &[Task],
    cfg: &EpisodeConfig,
    backend: &dyn DecisionBackend,
    threads: usize,
    repeat: usize,
) -> Result<Vec<EpisodeRun>, BenchError> {
    let mut jobs = Vec::with_capacity(tasks.len());
    for (i, t) in tasks.iter().enumerate() {
        let scene = scenes
            .iter()
            .find(|s| s.id == t.scene_id)
            .ok_or_else(|| BenchError::UnknownScene { task: t.id.clone(), scene: t.scene_id.clone() })?;
        let seed = cfg.seed.wrapping_add((repeat * tasks.len() + i) as u64);
        jobs.push((scene, t, EpisodeConfig { seed, ..cfg.clone() }));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| BenchError::Pool(e.to_string()))?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|(scene, task, cfg)| {
                let t0 = Instant::now();
                let outcome = run_episode(scene, task, cfg, backend);
                let result = episode_result(scene, task, &outcome, cfg.eps_dis, t0.elapsed().as_secs_f64());
                log::info!("{} on {}: {:?} after {} steps", task.id, scene.id, outcome.reason, outcome.budget);
                EpisodeRun { outcome, result }
            })
            .collect()
    }))
}
