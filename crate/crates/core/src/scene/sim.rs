use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Scene, SceneObject};
use crate::geometry::Point2;

/// Forward translation of one `MoveAhead`, meters.
pub const MOVE_STEP: f64 = 0.25;
/// Rotation of one turn or look action, degrees.
pub const TURN_STEP: i32 = 30;
/// Collision disc radius, meters.
pub const AGENT_RADIUS: f64 = 0.2;
pub const CAMERA_HEIGHT: f64 = 1.5;
const PITCH_LIMIT: i32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    MoveAhead,
    RotateRight,
    RotateLeft,
    LookUp,
    LookDown,
    Done,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::MoveAhead,
        Action::RotateRight,
        Action::RotateLeft,
        Action::LookUp,
        Action::LookDown,
        Action::Done,
    ];
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepFeedback {
    Success,
    Obstructed,
    OutOfBounds,
    Other(String),
}

impl StepFeedback {
    pub fn is_success(&self) -> bool {
        matches!(self, StepFeedback::Success)
    }

    pub fn label(&self) -> String {
        match self {
            StepFeedback::Success => "Success".into(),
            StepFeedback::Obstructed => "Obstructed".into(),
            StepFeedback::OutOfBounds => "Out-of-Bounds".into(),
            StepFeedback::Other(text) => text.clone(),
        }
    }
}

/// Agent pose. Heading is `(cos yaw, sin yaw)`; `RotateRight` adds 30 degrees,
/// which reads as clockwise on a map drawn with y pointing down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentPose {
    pub position: Point2,
    pub z: f64,
    pub yaw: i32,
    pub pitch: i32,
}

impl AgentPose {
    pub fn new(position: Point2, yaw: i32) -> Self {
        Self { position, z: CAMERA_HEIGHT, yaw: yaw.rem_euclid(360), pitch: 0 }
    }

    pub fn heading(&self) -> Point2 {
        let r = (self.yaw as f64).to_radians();
        Point2::new(r.cos(), r.sin())
    }

    pub fn is_well_formed(&self) -> bool {
        self.position.is_finite()
            && self.z.is_finite()
            && (0..360).contains(&self.yaw)
            && self.yaw % TURN_STEP == 0
            && [-PITCH_LIMIT, 0, PITCH_LIMIT].contains(&self.pitch)
    }
}

/// Apply one primitive action. Failures are feedback, never errors.
pub fn step(scene: &Scene, pose: &AgentPose, action: Action) -> (AgentPose, StepFeedback) {
    let mut next = *pose;
    match action {
        Action::MoveAhead => {
            let h = pose.heading();
            let dest = Point2::new(pose.position.x + MOVE_STEP * h.x, pose.position.y + MOVE_STEP * h.y);
            let b = scene.bounds;
            if dest.x - AGENT_RADIUS < b.min_x
                || dest.x + AGENT_RADIUS > b.max_x
                || dest.y - AGENT_RADIUS < b.min_y
                || dest.y + AGENT_RADIUS > b.max_y
            {
                return (*pose, StepFeedback::OutOfBounds);
            }
            let blocked = scene
                .collision_rects()
                .any(|r| r.distance_to_segment(pose.position, dest) < AGENT_RADIUS);
            if blocked || !scene.navigable_grid.is_navigable_at(dest) {
                return (*pose, StepFeedback::Obstructed);
            }
            next.position = dest;
        }
        Action::RotateRight => next.yaw = (pose.yaw + TURN_STEP).rem_euclid(360),
        Action::RotateLeft => next.yaw = (pose.yaw - TURN_STEP).rem_euclid(360),
        Action::LookUp => next.pitch = (pose.pitch + TURN_STEP).min(PITCH_LIMIT),
        Action::LookDown => next.pitch = (pose.pitch - TURN_STEP).max(-PITCH_LIMIT),
        Action::Done => {}
    }
    (next, StepFeedback::Success)
}

/// Nearest object of a matching class whose footprint center is within
/// `eps` (inclusive) of the agent on the floor plane.
pub fn object_within_success_radius<'a>(
    scene: &'a Scene,
    pose: &AgentPose,
    classes: &BTreeSet<String>,
    eps: f64,
) -> Option<&'a SceneObject> {
    scene
        .objects
        .iter()
        .filter(|o| classes.contains(&o.class))
        .map(|o| (o, o.bounds.footprint().center().distance(pose.position)))
        .filter(|(_, d)| *d <= eps)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(o, _)| o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, Point3};
    use crate::scene::{scripted, Obstacle, ObstacleKind};

    fn open_room() -> Scene {
        scripted::empty_room(6.0, 6.0)
    }

    #[test]
    fn move_ahead_advances_a_quarter_meter() {
        let scene = open_room();
        let pose = AgentPose::new(Point2::new(3.0, 3.0), 0);
        let (next, fb) = step(&scene, &pose, Action::MoveAhead);
        assert_eq!(fb, StepFeedback::Success);
        assert!((next.position.distance(pose.position) - 0.25).abs() < 1e-12);
        assert!((next.position.x - 3.25).abs() < 1e-12);
    }

    #[test]
    fn move_into_wall_is_obstructed() {
        let mut scene = open_room();
        // Wall face 0.1 m ahead of the disc edge's reach.
        scene.obstacles.push(Obstacle {
            kind: ObstacleKind::Wall,
            bounds: Aabb::new(Point3::new(3.3, 0.0, 0.0), Point3::new(3.4, 6.0, 2.5)),
        });
        let pose = AgentPose::new(Point2::new(3.0, 3.0), 0);
        let (next, fb) = step(&scene, &pose, Action::MoveAhead);
        assert_eq!(fb, StepFeedback::Obstructed);
        assert_eq!(next, pose);
    }

    #[test]
    fn leaving_bounds_is_reported() {
        let scene = open_room();
        let pose = AgentPose::new(Point2::new(0.3, 3.0), 180);
        let (next, fb) = step(&scene, &pose, Action::MoveAhead);
        assert_eq!(fb, StepFeedback::OutOfBounds);
        assert_eq!(next, pose);
    }

    #[test]
    fn rotation_wraps_and_pitch_clamps() {
        let scene = open_room();
        let pose = AgentPose::new(Point2::new(3.0, 3.0), 330);
        assert_eq!(step(&scene, &pose, Action::RotateRight).0.yaw, 0);
        assert_eq!(step(&scene, &AgentPose::new(pose.position, 0), Action::RotateLeft).0.yaw, 330);
        let up = step(&scene, &pose, Action::LookUp).0;
        assert_eq!(up.pitch, 30);
        assert_eq!(step(&scene, &up, Action::LookUp).0.pitch, 30);
        let (done, fb) = step(&scene, &pose, Action::Done);
        assert_eq!((done, fb), (pose, StepFeedback::Success));
    }

    #[test]
    fn success_radius_is_inclusive() {
        let mut scene = open_room();
        let chair = |id, cx: f64| crate::scene::SceneObject {
            id,
            class: "chair".into(),
            bounds: Aabb::new(Point3::new(cx - 0.2, 2.8, 0.0), Point3::new(cx + 0.2, 3.2, 0.8)),
            surface_points: vec![],
        };
        let pose = AgentPose::new(Point2::new(1.0, 3.0), 0);
        let classes: BTreeSet<String> = ["chair".to_string()].into();
        scene.objects = vec![chair(0, 2.4)];
        assert_eq!(object_within_success_radius(&scene, &pose, &classes, 1.5).map(|o| o.id), Some(0));
        scene.objects = vec![chair(0, 2.6)];
        assert!(object_within_success_radius(&scene, &pose, &classes, 1.5).is_none());
        scene.objects = vec![chair(0, 2.5), chair(1, 1.2)];
        assert_eq!(object_within_success_radius(&scene, &pose, &classes, 1.5).map(|o| o.id), Some(1));
    }

    #[test]
    fn exactly_on_boundary_is_found() {
        let mut scene = open_room();
        scene.objects = vec![crate::scene::SceneObject {
            id: 0,
            class: "chair".into(),
            bounds: Aabb::new(Point3::new(2.25, 2.75, 0.0), Point3::new(2.75, 3.25, 0.8)),
            surface_points: vec![],
        }];
        let pose = AgentPose::new(Point2::new(1.0, 3.0), 0);
        let classes: BTreeSet<String> = ["chair".to_string()].into();
        assert!(object_within_success_radius(&scene, &pose, &classes, 1.5).is_some());
    }
}
