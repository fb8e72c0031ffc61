//! Instruction decomposition, target location and status tracking behind
//! one backend interface.

mod oracle;
mod prompt;
mod remote;

pub use oracle::OracleBackend;
pub use prompt::{PromptTemplate, TemplateError, BREAK_TEMPLATE, LOCATE_TEMPLATE, STATUS_TEMPLATE};
pub use remote::{
    extract_json_object, parse_break_reply, parse_locate_reply, parse_status_reply, remote_chat, ChatMessage, ChatRequest,
    ChatResponse, RemoteBackend, RemoteConfig, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;
use crate::masmap::MemoryBank;
use crate::scene::{Action, AgentPose, Scene};

/// Name used for exploration targets that are not objects.
pub const FRONTIER_TARGET: &str = "frontier";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subtask {
    pub requirement: String,
    pub preference: String,
    /// Ground-truth classes that satisfy the subtask; only the oracle reads it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub satisfying_classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocateDecision {
    pub target_object: String,
    pub target_position: Point2,
    pub rationale: String,
}

impl LocateDecision {
    pub fn is_frontier(&self) -> bool {
        self.target_object == FRONTIER_TARGET
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusDecision {
    pub completed_subtask: Option<usize>,
    pub reason: String,
    pub updated_status: Vec<bool>,
}

impl StatusDecision {
    pub fn unchanged(status: &[bool], reason: impl Into<String>) -> Self {
        Self { completed_subtask: None, reason: reason.into(), updated_status: status.to_vec() }
    }
}

/// The object/position pair a repeatedly failing target must not repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraInfo {
    pub object: String,
    pub position: Point2,
}

impl ExtraInfo {
    pub fn text(&self) -> String {
        format!(
            "Do not select {} or ({:.2}, {:.2}) in the next step",
            self.object, self.position.x, self.position.y
        )
    }

    /// Radius around the excluded position inside which objects count as the same target.
    pub const POSITION_RADIUS: f64 = 0.5;

    pub fn excludes(&self, object: &str, position: Point2) -> bool {
        object == self.object || position.distance(self.position) <= Self::POSITION_RADIUS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierCandidate {
    pub position: Point2,
    pub size: usize,
}

/// One detected object in the current panorama, as summarized for status reasoning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedObject {
    pub class: String,
    pub position: Point2,
    pub distance: f64,
}

pub struct LocateContext<'a> {
    pub instruction: &'a str,
    pub subtasks: &'a [Subtask],
    pub status: &'a [bool],
    pub bank: &'a MemoryBank,
    pub agent: Point2,
    pub extra_info: Option<&'a ExtraInfo>,
    pub frontiers: &'a [FrontierCandidate],
}

pub struct StatusContext<'a> {
    pub instruction: &'a str,
    pub subtasks: &'a [Subtask],
    pub status: &'a [bool],
    pub bank: &'a MemoryBank,
    pub observation: &'a [ObservedObject],
    pub action: Action,
    pub agent: &'a AgentPose,
    /// Ground truth; only the oracle reads it.
    pub scene: &'a Scene,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("instruction could not be decomposed after {attempts} attempts")]
    DecompositionFailed { attempts: usize },
    #[error("no target candidates in memory and no frontier left")]
    NoCandidates,
    #[error("status update tried to reset a completed subtask")]
    InconsistentStatus,
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {0}")]
    HttpError(u16),
    #[error("unparseable reply: {0}")]
    ParseError(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
}

pub trait DecisionBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Decompose the instruction. `authored` carries the task file's own
    /// subtask boundaries, which only the oracle may use.
    fn break_instruction(&self, instruction: &str, authored: &[Subtask])
        -> Result<(Vec<Subtask>, Vec<bool>), DecisionError>;

    fn locate_next(&self, ctx: &LocateContext<'_>) -> Result<LocateDecision, DecisionError>;

    /// Called only for `Done`; the gate lives in [`update_status`].
    fn assess_status(&self, ctx: &StatusContext<'_>) -> Result<StatusDecision, DecisionError>;
}

/// Check that `next` differs from `prev` in at most one slot, False to True only.
pub fn validate_status(prev: &[bool], next: &StatusDecision) -> Result<(), DecisionError> {
    if next.updated_status.len() != prev.len() {
        return Err(DecisionError::ParseError(format!(
            "status list has {} entries, expected {}",
            next.updated_status.len(),
            prev.len()
        )));
    }
    let changed: Vec<usize> = (0..prev.len()).filter(|&i| prev[i] != next.updated_status[i]).collect();
    if changed.iter().any(|&i| prev[i]) {
        return Err(DecisionError::InconsistentStatus);
    }
    if changed.len() > 1 {
        return Err(DecisionError::InconsistentStatus);
    }
    if let Some(c) = next.completed_subtask {
        if c >= prev.len() || changed.first().is_some_and(|&i| i != c) {
            return Err(DecisionError::InconsistentStatus);
        }
    }
    Ok(())
}

/// Status update gated on `Done`; rejected backend outputs keep the input status.
pub fn update_status(backend: &dyn DecisionBackend, ctx: &StatusContext<'_>) -> StatusDecision {
    if ctx.action != Action::Done {
        return StatusDecision::unchanged(ctx.status, "no Done action");
    }
    match backend.assess_status(ctx).and_then(|d| validate_status(ctx.status, &d).map(|_| d)) {
        Ok(mut d) => {
            if d.completed_subtask.is_none() {
                d.completed_subtask = (0..ctx.status.len()).find(|&i| !ctx.status[i] && d.updated_status[i]);
            }
            d
        }
        Err(e) => {
            log::warn!("status update rejected: {e}");
            StatusDecision::unchanged(ctx.status, format!("rejected: {e}"))
        }
    }
}
