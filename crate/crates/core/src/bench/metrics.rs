//! SR, ISR, ISPL and STL over episode results.

use serde::{Deserialize, Serialize};

use super::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskResult {
    pub success: bool,
    /// Ground-truth shortest length from the subtask's activation point;
    /// `None` when the ground-truth grid offers no path.
    pub shortest: Option<f64>,
    pub actual: f64,
}

impl SubtaskResult {
    /// Success weighted by shortest over the longer of shortest and actual.
    pub fn weighted(&self) -> f64 {
        if !self.success {
            return 0.0;
        }
        match self.shortest {
            Some(s) if s.max(self.actual) > 0.0 => s / s.max(self.actual),
            // Succeeded where it started, or the grid missed a path the
            // agent found: nothing shorter is known.
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task_id: String,
    pub scene_id: String,
    pub subtasks: Vec<SubtaskResult>,
    /// Budget steps consumed.
    pub steps: usize,
    pub wall_time_s: f64,
}

impl EpisodeResult {
    pub fn all_success(&self) -> bool {
        !self.subtasks.is_empty() && self.subtasks.iter().all(|s| s.success)
    }
}

/// How ISPL folds subtask terms together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsplAveraging {
    /// Mean within each task, then across tasks.
    #[default]
    WithinTask,
    /// One mean over all subtasks.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tasks: usize,
    pub subtasks: usize,
    /// Percentages.
    pub sr: f64,
    pub isr: f64,
    pub ispl: f64,
    /// Mean steps over fully successful tasks.
    pub stl: Option<f64>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn compute_metrics(results: &[EpisodeResult], averaging: IsplAveraging) -> Result<MetricsReport, BenchError> {
    if results.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    let subtasks: usize = results.iter().map(|r| r.subtasks.len()).sum();
    if subtasks == 0 {
        return Err(BenchError::EmptyInput);
    }
    let successes = results.iter().flat_map(|r| &r.subtasks).filter(|s| s.success).count();
    let full = results.iter().filter(|r| r.all_success()).count();
    let ispl = match averaging {
        IsplAveraging::WithinTask => {
            mean(results.iter().map(|r| mean(r.subtasks.iter().map(SubtaskResult::weighted)).unwrap_or(0.0)))
        }
        IsplAveraging::Flat => mean(results.iter().flat_map(|r| &r.subtasks).map(SubtaskResult::weighted)),
    }
    .unwrap_or(0.0);
    Ok(MetricsReport {
        tasks: results.len(),
        subtasks,
        sr: 100.0 * full as f64 / results.len() as f64,
        isr: 100.0 * successes as f64 / subtasks as f64,
        ispl: 100.0 * ispl,
        stl: mean(results.iter().filter(|r| r.all_success()).map(|r| r.steps as f64)),
    })
}

/// Field-wise mean of several runs; STL averages the runs that have one.
pub fn mean_report(runs: &[MetricsReport]) -> Option<MetricsReport> {
    let first = runs.first()?;
    let n = runs.len() as f64;
    Some(MetricsReport {
        tasks: first.tasks,
        subtasks: first.subtasks,
        sr: runs.iter().map(|r| r.sr).sum::<f64>() / n,
        isr: runs.iter().map(|r| r.isr).sum::<f64>() / n,
        ispl: runs.iter().map(|r| r.ispl).sum::<f64>() / n,
        stl: mean(runs.iter().filter_map(|r| r.stl)),
    })
}
