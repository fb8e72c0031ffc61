//! The simulated world: an immutable multi-room scene, agent kinematics in
//! the six-action space, and ground-truth perception.

mod generate;
mod grid;
mod perception;
pub mod scripted;
mod sim;

pub use generate::{generate_scene, ObjectClassSpec, SceneGenConfig};
pub use grid::{CellIndex, NavGrid};
pub(crate) use perception::in_forward_view;
pub use perception::{
    sense_depth, sense_panorama, view_of_bearing, NoiseConfig, Observation, SensorConfig,
};
pub use sim::{
    object_within_success_radius, step, Action, AgentPose, StepFeedback, AGENT_RADIUS,
    CAMERA_HEIGHT, MOVE_STEP, TURN_STEP,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Point3, Rect};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene configuration infeasible: {0}")]
    ConfigInfeasible(String),
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("malformed scene document: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: usize,
    pub rect: Rect,
}

/// Opening in an interior wall between two rooms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Door {
    pub span: Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Wall,
    /// Blocks motion but is invisible to depth sensing and does not occlude.
    Glass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub kind: ObstacleKind,
    #[serde(rename = "box")]
    pub bounds: Aabb,
}

impl Obstacle {
    pub fn perceivable(&self) -> bool {
        self.kind != ObstacleKind::Glass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: usize,
    pub class: String,
    #[serde(rename = "box")]
    pub bounds: Aabb,
    pub surface_points: Vec<Point3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub schema_version: u32,
    pub id: String,
    pub seed: u64,
    pub bounds: Rect,
    pub rooms: Vec<Room>,
    pub doors: Vec<Door>,
    pub obstacles: Vec<Obstacle>,
    pub objects: Vec<SceneObject>,
    pub navigable_grid: NavGrid,
    pub spawns: Vec<AgentPose>,
}

impl Scene {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scene serialization is infallible")
    }

    /// Parse and validate a scene document.
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let scene: Scene = serde_json::from_str(text)?;
        if scene.schema_version != SCENE_SCHEMA_VERSION {
            return Err(SceneError::SchemaVersion {
                found: scene.schema_version,
                expected: SCENE_SCHEMA_VERSION,
            });
        }
        scene.validate()?;
        Ok(scene)
    }

    /// Classes present in the scene, sorted and deduplicated.
    pub fn classes(&self) -> Vec<String> {
        let mut classes: Vec<String> = self.objects.iter().map(|o| o.class.clone()).collect();
        classes.sort();
        classes.dedup();
        classes
    }

    /// Footprints of everything that blocks motion.
    pub fn collision_rects(&self) -> impl Iterator<Item = Rect> + '_ {
        self.obstacles
            .iter()
            .map(|o| o.bounds.footprint())
            .chain(self.objects.iter().map(|o| o.bounds.footprint()))
    }

    /// Check the structural invariants of a scene.
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |msg: String| Err(SceneError::Invalid(msg));
        let b = self.bounds;
        if !(b.min_x.is_finite() && b.min_y.is_finite() && b.max_x.is_finite() && b.max_y.is_finite())
            || b.width() <= 0.0
            || b.height() <= 0.0
        {
            return bad("bounds must be a finite non-empty rectangle".into());
        }
        self.navigable_grid.validate()?;
        for obj in &self.objects {
            if obj.class.is_empty() {
                return bad(format!("object {} has an empty class", obj.id));
            }
            if !obj.bounds.is_valid() || !b.contains_rect(&obj.bounds.footprint()) {
                return bad(format!("object {} footprint outside bounds", obj.id));
            }
            if let Some(p) = obj
                .surface_points
                .iter()
                .find(|p| !matches!(obj.bounds.surface_distance(**p), d if d <= 1e-6))
            {
                return bad(format!("object {} has off-surface point {:?}", obj.id, p));
            }
        }
        for o in &self.obstacles {
            if !o.bounds.is_valid() {
                return bad("obstacle box with inverted extent".into());
            }
        }
        for (i, s) in self.spawns.iter().enumerate() {
            if !s.is_well_formed() {
                return bad(format!("spawn {i} has an invalid orientation"));
            }
            if !self.navigable_grid.is_navigable_at(s.position) {
                return bad(format!("spawn {i} is not on a navigable cell"));
            }
        }
        Ok(())
    }
}
