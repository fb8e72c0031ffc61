//! Benchmark tasks, metrics, shortest-path oracles and result files.

mod metrics;
mod report;
mod runner;
mod shortest;

pub use metrics::{compute_metrics, mean_report, EpisodeResult, IsplAveraging, MetricsReport, SubtaskResult};
pub use report::{write_results_csv, Summary, SUMMARY_SCHEMA_VERSION};
pub use runner::{episode_result, run_tasks, EpisodeRun};
pub use shortest::{grid_moves, search, shortest_path_length, start_cell, MoveCount};

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::Subtask;
use crate::scene::Scene;

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("no metric input")]
    EmptyInput,
    #[error("no path to a success cell")]
    Unreachable,
    #[error("scene has no object of classes {0:?}")]
    NoSatisfyingObject(Vec<String>),
    #[error("scene {scene} (spawn {spawn}) offers fewer than {needed} distinct matchable demands")]
    Unsatisfiable { scene: String, spawn: usize, needed: usize },
    #[error("no scenes to draw tasks from")]
    NoScenes,
    #[error("task line {line}: {message}")]
    TaskLine { line: usize, message: String },
    #[error("task {task}: {message}")]
    InvalidTask { task: String, message: String },
    #[error("task {task} names unknown scene {scene}")]
    UnknownScene { task: String, scene: String },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("csv: {0}")]
    Csv(String),
}

pub const SUBTASKS_PER_TASK: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: String,
    pub instruction: String,
    pub subtasks: Vec<Subtask>,
    pub scene_id: String,
    pub spawn_index: usize,
}

impl Task {
    fn check(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("empty task id".into());
        }
        if self.subtasks.is_empty() {
            return Err("no subtasks".into());
        }
        if let Some(k) = self.subtasks.iter().position(|s| s.satisfying_classes.is_empty()) {
            return Err(format!("subtask {k} lists no satisfying classes"));
        }
        Ok(())
    }

    /// Every subtask has a satisfying object reachable from the spawn.
    pub fn validate_against(&self, scene: &Scene, eps: f64) -> Result<(), BenchError> {
        let bad = |message: String| BenchError::InvalidTask { task: self.id.clone(), message };
        self.check().map_err(bad)?;
        if scene.id != self.scene_id {
            return Err(BenchError::UnknownScene { task: self.id.clone(), scene: self.scene_id.clone() });
        }
        let spawn = scene.spawns.get(self.spawn_index).ok_or_else(|| bad(format!("no spawn {}", self.spawn_index)))?;
        for (k, s) in self.subtasks.iter().enumerate() {
            let classes: BTreeSet<String> = s.satisfying_classes.iter().cloned().collect();
            shortest_path_length(scene, spawn.position, &classes, eps)
                .map_err(|e| bad(format!("subtask {k}: {e}")))?;
        }
        Ok(())
    }
}

pub fn write_tasks(tasks: &[Task]) -> String {
    let mut out = String::new();
    for t in tasks {
        out.push_str(&serde_json::to_string(t).expect("tasks serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_tasks(text: &str) -> Result<Vec<Task>, BenchError> {
    let mut tasks = Vec::new();
    let mut ids = BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| BenchError::TaskLine { line: n + 1, message };
        let t: Task = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        t.check().map_err(err)?;
        if !ids.insert(t.id.clone()) {
            return Err(err(format!("duplicate task id {}", t.id)));
        }
        tasks.push(t);
    }
    Ok(tasks)
}

/// One demand phrasing and the object classes that satisfy it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandTemplate {
    pub requirement: String,
    pub preference: String,
    pub classes: Vec<String>,
}

fn demand(requirement: &str, preference: &str, classes: &[&str]) -> DemandTemplate {
    DemandTemplate {
        requirement: requirement.into(),
        preference: preference.into(),
        classes: classes.iter().map(|c| c.to_string()).collect(),
    }
}

/// Demands over the default scene catalog. Several preferences may share a
/// requirement; a task never repeats a requirement.
pub fn default_demand_catalog() -> Vec<DemandTemplate> {
    vec![
        demand("rest after a long day", "somewhere soft to stretch out", &["sofa", "bed"]),
        demand("rest after a long day", "sitting upright", &["armchair", "chair"]),
        demand("set up a cozy entertainment corner", "with a screen to watch", &["television"]),
        demand("set up a cozy entertainment corner", "with comfortable seating", &["sofa", "armchair"]),
        demand("get a cold drink", "from a chilled appliance", &["fridge"]),
        demand("warm up leftovers", "quickly", &["microwave"]),
        demand("read a novel", "picking it off a shelf", &["bookshelf"]),
        demand("read a novel", "under good light", &["floor lamp"]),
        demand("brighten up a dim room", "with a standing light", &["floor lamp"]),
        demand("work on a report", "at a proper work surface", &["desk"]),
        demand("work on a report", "at a large table", &["dining table"]),
        demand("have dinner", "seated at a table", &["dining table"]),
        demand("water something green", "a potted plant", &["houseplant"]),
        demand("wash my hands", "with running water", &["sink"]),
        demand("do the laundry", "in a machine", &["washing machine"]),
        demand("take a relaxing soak", "in a tub", &["bathtub"]),
        demand("put away some dishes", "behind closed doors", &["cabinet"]),
        demand("take a nap", "lying down fully", &["bed"]),
    ]
}

/// Instruction text for a subtask list: clauses joined by "; ".
pub fn compose_instruction(subtasks: &[Subtask]) -> String {
    subtasks
        .iter()
        .map(|s| if s.preference.is_empty() { s.requirement.clone() } else { format!("{}, {}", s.requirement, s.preference) })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Demands matchable from `spawn`: the template's classes restricted to those
/// with a reachable object, grouped by requirement.
fn matchable(scene: &Scene, spawn: usize, catalog: &[DemandTemplate], eps: f64) -> Vec<Vec<Subtask>> {
    let from = scene.spawns[spawn].position;
    let mut reachable: BTreeSet<String> = BTreeSet::new();
    for c in scene.classes() {
        if shortest_path_length(scene, from, &BTreeSet::from([c.clone()]), eps).is_ok() {
            reachable.insert(c);
        }
    }
    let mut groups: Vec<(String, Vec<Subtask>)> = Vec::new();
    for d in catalog {
        let classes: Vec<String> = d.classes.iter().filter(|c| reachable.contains(*c)).cloned().collect();
        if classes.is_empty() {
            continue;
        }
        let sub = Subtask { requirement: d.requirement.clone(), preference: d.preference.clone(), satisfying_classes: classes };
        match groups.iter_mut().find(|(r, _)| *r == d.requirement) {
            Some((_, v)) => v.push(sub),
            None => groups.push((d.requirement.clone(), vec![sub])),
        }
    }
    groups.into_iter().map(|(_, v)| v).collect()
}

/// `count` tasks of three distinct demands each, cycling through `scenes`
/// with a random spawn per task.
pub fn generate_tasks(
    scenes: &[Scene],
    catalog: &[DemandTemplate],
    count: usize,
    seed: u64,
    eps: f64,
) -> Result<Vec<Task>, BenchError> {
    if scenes.is_empty() {
        return Err(BenchError::NoScenes);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache: Vec<Vec<Option<Vec<Vec<Subtask>>>>> = scenes.iter().map(|s| vec![None; s.spawns.len()]).collect();
    let mut tasks = Vec::with_capacity(count);
    for i in 0..count {
        let si = i % scenes.len();
        let scene = &scenes[si];
        if scene.spawns.is_empty() {
            return Err(BenchError::Unsatisfiable { scene: scene.id.clone(), spawn: 0, needed: SUBTASKS_PER_TASK });
        }
        let spawn = rng.random_range(0..scene.spawns.len());
        let groups = cache[si][spawn].get_or_insert_with(|| matchable(scene, spawn, catalog, eps));
        if groups.len() < SUBTASKS_PER_TASK {
            return Err(BenchError::Unsatisfiable { scene: scene.id.clone(), spawn, needed: SUBTASKS_PER_TASK });
        }
        let mut order: Vec<usize> = (0..groups.len()).collect();
        order.shuffle(&mut rng);
        let subtasks: Vec<Subtask> = order[..SUBTASKS_PER_TASK]
            .iter()
            .map(|g| groups[*g].choose(&mut rng).expect("groups are nonempty").clone())
            .collect();
        tasks.push(Task {
            id: format!("task-{i:04}"),
            instruction: compose_instruction(&subtasks),
            subtasks,
            scene_id: scene.id.clone(),
            spawn_index: spawn,
        });
    }
    Ok(tasks)
}
