//! Per-episode CSV rows and the metrics summary document.

use serde::{Deserialize, Serialize};

use super::{BenchError, EpisodeResult, IsplAveraging, MetricsReport};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

fn joined<T>(xs: &[T], f: impl Fn(&T) -> String) -> String {
    xs.iter().map(f).collect::<Vec<_>>().join(";")
}

/// One row per episode; per-subtask columns hold `;`-separated values.
/// Wall time is left out so reruns compare byte for byte.
pub fn write_results_csv(results: &[EpisodeResult]) -> Result<String, BenchError> {
    let err = |e: csv::Error| BenchError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["task_id", "scene_id", "run_success", "success", "shortest_m", "actual_m", "steps"]).map_err(err)?;
    for r in results {
        w.write_record([
            r.task_id.clone(),
            r.scene_id.clone(),
            u8::from(r.all_success()).to_string(),
            joined(&r.subtasks, |s| u8::from(s.success).to_string()),
            joined(&r.subtasks, |s| s.shortest.map_or("unreachable".into(), |v| format!("{v:.4}"))),
            joined(&r.subtasks, |s| format!("{:.4}", s.actual)),
            r.steps.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Metrics of each repeat, their mean, and the effective configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub backend: String,
    pub ispl_averaging: IsplAveraging,
    pub runs: Vec<MetricsReport>,
    pub mean: MetricsReport,
    pub config: serde_json::Value,
}

impl Summary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}
