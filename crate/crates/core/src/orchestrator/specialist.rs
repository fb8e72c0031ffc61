//! Scripted fast-tempo policy and the ground-truth success test.

use std::collections::BTreeSet;

use crate::decision::Subtask;
use crate::geometry::angle_diff_degrees;
use crate::scene::{in_forward_view, object_within_success_radius, Action, AgentPose, Scene, SensorConfig, TURN_STEP};

/// Bearing error, degrees, below which the specialist walks instead of turning.
const ALIGN_TOLERANCE: f64 = 0.5 * TURN_STEP as f64;

fn open_classes(subtasks: &[Subtask], complete: &[bool]) -> BTreeSet<String> {
    subtasks
        .iter()
        .enumerate()
        .filter(|(i, _)| !complete.get(*i).copied().unwrap_or(false))
        .flat_map(|(_, s)| s.satisfying_classes.iter().cloned())
        .collect()
}

/// Turn toward `bearing`, shorter way first, ties to the right.
pub fn turn_toward(pose: &AgentPose, bearing: f64) -> Action {
    if angle_diff_degrees(pose.yaw as f64, bearing) >= 0.0 {
        Action::RotateRight
    } else {
        Action::RotateLeft
    }
}

/// Greedy stand-in policy: `Done` when a satisfying object in view is in
/// range, otherwise approach the nearest one in view, otherwise scan.
pub fn fast_tempo_specialist(
    scene: &Scene,
    pose: &AgentPose,
    subtasks: &[Subtask],
    complete: &[bool],
    sensor: &SensorConfig,
    eps: f64,
) -> Action {
    let classes = open_classes(subtasks, complete);
    let nearest = scene
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| classes.contains(&o.class))
        .filter(|(k, _)| in_forward_view(scene, pose, sensor, *k))
        .map(|(_, o)| (o.bounds.footprint().center(), o.bounds.footprint().center().distance(pose.position)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    match nearest {
        Some((_, d)) if d <= eps => Action::Done,
        Some((c, _)) => {
            let bearing = (c.y - pose.position.y).atan2(c.x - pose.position.x).to_degrees();
            if angle_diff_degrees(pose.yaw as f64, bearing).abs() <= ALIGN_TOLERANCE {
                Action::MoveAhead
            } else {
                turn_toward(pose, bearing)
            }
        }
        None => Action::RotateRight,
    }
}

/// Whether some object satisfying the subtask lies within `eps` of the agent.
pub fn check_success(scene: &Scene, pose: &AgentPose, subtask: &Subtask, eps: f64) -> bool {
    let classes: BTreeSet<String> = subtask.satisfying_classes.iter().cloned().collect();
    object_within_success_radius(scene, pose, &classes, eps).is_some()
}
