//! Line-delimited episode traces and the replay verifier.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::EpisodeConfig;
use crate::corrector::CorrectionCause;
use crate::decision::{ExtraInfo, LocateDecision, StatusDecision, Subtask};
use crate::scene::{step, Action, AgentPose, Scene, StepFeedback};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tempo {
    Slow,
    Fast,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    AllComplete,
    BudgetExhausted,
    NoCandidates,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub scene_id: String,
    pub task_id: String,
    pub backend: String,
    pub instruction: String,
    pub spawn: AgentPose,
    pub config: EpisodeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based index of the primitive action.
    pub step: usize,
    pub tempo: Tempo,
    pub action: Action,
    pub feedback: StepFeedback,
    pub pose: AgentPose,
    /// Budget consumed after this action.
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionKind {
    Break { subtasks: Vec<Subtask>, status: Vec<bool> },
    Locate { decision: Option<LocateDecision>, extra_info: Option<ExtraInfo>, frontiers: usize, error: Option<String> },
    Status { decision: StatusDecision },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    /// Primitive actions taken before the call.
    pub step: usize,
    #[serde(flatten)]
    pub kind: DecisionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    pub step: usize,
    pub cause: CorrectionCause,
    pub pose: AgentPose,
    pub target: String,
    pub consecutive_failures: usize,
    /// Set when the failure count reached the tolerance.
    pub extra_info: Option<ExtraInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndRecord {
    pub actions: usize,
    pub budget: usize,
    pub reason: EndReason,
    pub status: Vec<bool>,
    pub success: Vec<bool>,
    pub pose: AgentPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum TraceRecord {
    Header(TraceHeader),
    Step(StepRecord),
    Decision(DecisionRecord),
    Correction(CorrectionRecord),
    End(EndRecord),
}

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("trace must start with exactly one header record")]
    MissingHeader,
    #[error("line {line}: step index {step} does not increase")]
    OutOfOrder { line: usize, step: usize },
    #[error("unsupported trace schema version {0}")]
    SchemaVersion(u32),
}

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("trace belongs to scene {trace}, not {scene}")]
    MismatchedScene { trace: String, scene: String },
    #[error("trace spawn pose is not one of the scene's spawns")]
    SpawnMismatch,
    #[error("step {step}: replay diverged from the recorded pose or feedback")]
    Diverged { step: usize },
}

pub fn write_trace(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
        out.push('\n');
    }
    out
}

/// Parse and structurally check a trace document.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, TraceError> {
    let mut records = Vec::new();
    let mut last_step = 0;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord =
            serde_json::from_str(line).map_err(|e| TraceError::Json { line: n + 1, message: e.to_string() })?;
        match (&rec, records.is_empty()) {
            (TraceRecord::Header(h), true) => {
                if h.schema_version != TRACE_SCHEMA_VERSION {
                    return Err(TraceError::SchemaVersion(h.schema_version));
                }
            }
            (TraceRecord::Header(_), false) | (_, true) => return Err(TraceError::MissingHeader),
            (TraceRecord::Step(s), false) => {
                if s.step <= last_step {
                    return Err(TraceError::OutOfOrder { line: n + 1, step: s.step });
                }
                last_step = s.step;
            }
            _ => {}
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(TraceError::MissingHeader);
    }
    Ok(records)
}

pub fn header(records: &[TraceRecord]) -> Option<&TraceHeader> {
    match records.first() {
        Some(TraceRecord::Header(h)) => Some(h),
        _ => None,
    }
}

pub fn steps(records: &[TraceRecord]) -> impl Iterator<Item = &StepRecord> {
    records.iter().filter_map(|r| match r {
        TraceRecord::Step(s) => Some(s),
        _ => None,
    })
}

/// Re-execute the recorded actions and check every pose and feedback.
/// Returns the final pose.
pub fn replay(scene: &Scene, records: &[TraceRecord]) -> Result<AgentPose, ReplayError> {
    let h = header(records).ok_or(TraceError::MissingHeader)?;
    if h.scene_id != scene.id {
        return Err(ReplayError::MismatchedScene { trace: h.scene_id.clone(), scene: scene.id.clone() });
    }
    let mut pose = h.spawn;
    if !scene.spawns.contains(&pose) {
        return Err(ReplayError::SpawnMismatch);
    }
    for s in steps(records) {
        let (next, fb) = step(scene, &pose, s.action);
        if next != s.pose || fb != s.feedback {
            return Err(ReplayError::Diverged { step: s.step });
        }
        pose = next;
    }
    Ok(pose)
}
