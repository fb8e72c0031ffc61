//! Hand-built scenes for tests, demos and regression scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::generate::{rasterize_navigable, sample_surface};
use super::{AgentPose, Door, Obstacle, ObstacleKind, Room, Scene, SceneObject, SCENE_SCHEMA_VERSION};
use crate::geometry::{Aabb, Point2, Point3, Rect};

const RES: f64 = 0.05;

pub fn object(id: usize, class: &str, x0: f64, y0: f64, x1: f64, y1: f64, height: f64) -> SceneObject {
    let bounds = Aabb::new(Point3::new(x0, y0, 0.0), Point3::new(x1, y1, height));
    SceneObject { id, class: class.into(), bounds, surface_points: sample_surface(&bounds, RES) }
}

pub fn wall(kind: ObstacleKind, x0: f64, y0: f64, x1: f64, y1: f64) -> Obstacle {
    Obstacle { kind, bounds: Aabb::new(Point3::new(x0, y0, 0.0), Point3::new(x1, y1, 2.5)) }
}

/// Thin walls just inside the bounds.
pub fn perimeter(bounds: Rect, thickness: f64) -> Vec<Obstacle> {
    let Rect { min_x, min_y, max_x, max_y } = bounds;
    vec![
        wall(ObstacleKind::Wall, min_x, min_y, max_x, min_y + thickness),
        wall(ObstacleKind::Wall, min_x, max_y - thickness, max_x, max_y),
        wall(ObstacleKind::Wall, min_x, min_y + thickness, min_x + thickness, max_y - thickness),
        wall(ObstacleKind::Wall, max_x - thickness, min_y + thickness, max_x, max_y - thickness),
    ]
}

/// Assemble a scene and rasterize its navigable grid (largest component only).
#[allow(clippy::too_many_arguments)]
pub fn assemble(
    id: &str,
    seed: u64,
    bounds: Rect,
    rooms: Vec<Room>,
    doors: Vec<Door>,
    obstacles: Vec<Obstacle>,
    objects: Vec<SceneObject>,
    spawns: Vec<AgentPose>,
) -> Scene {
    let mut grid = rasterize_navigable(bounds, RES, &obstacles, &objects);
    grid.retain_largest_component();
    Scene {
        schema_version: SCENE_SCHEMA_VERSION,
        id: id.into(),
        seed,
        bounds,
        rooms,
        doors,
        obstacles,
        objects,
        navigable_grid: grid,
        spawns,
    }
}

/// Wall-less room; leaving it yields out-of-bounds feedback.
pub fn empty_room(width: f64, depth: f64) -> Scene {
    let bounds = Rect::new(0.0, 0.0, width, depth);
    let spawn = AgentPose::new(bounds.center(), 0);
    assemble(
        "empty-room",
        0,
        bounds,
        vec![Room { id: 0, rect: bounds }],
        vec![],
        vec![],
        vec![],
        vec![spawn],
    )
}

/// Walled room with the given objects and a single spawn.
pub fn walled_room(id: &str, width: f64, depth: f64, objects: Vec<SceneObject>, spawn: AgentPose) -> Scene {
    let bounds = Rect::new(0.0, 0.0, width, depth);
    assemble(id, 0, bounds, vec![Room { id: 0, rect: bounds }], vec![], perimeter(bounds, 0.1), objects, vec![spawn])
}

/// Two rooms split by a wall at x = 6. The lower opening is sealed by a
/// glass panel that depth sensing cannot see; the upper door is the detour.
/// The "fridge" in the right room is visible through the glass from spawn.
pub fn blocked_corridor(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = Rect::new(0.0, 0.0, 12.0, 7.0);
    let t = 0.1;
    let mut obstacles = perimeter(bounds, t);
    obstacles.push(wall(ObstacleKind::Glass, 5.95, t, 6.05, 2.6));
    obstacles.push(wall(ObstacleKind::Wall, 5.95, 2.6, 6.05, 5.2));
    obstacles.push(wall(ObstacleKind::Wall, 5.95, 6.4, 6.05, 7.0 - t));

    let snap = |v: f64| (v / RES).round() * RES;
    let fx = snap(rng.random_range(7.3..7.8));
    let fy = snap(rng.random_range(1.1..1.7));
    let objects = vec![
        object(0, "fridge", fx, fy, fx + 0.7, fy + 0.6, 1.2),
        object(1, "bookshelf", 1.0, 5.6, 1.9, 5.95, 1.1),
        object(2, "houseplant", 10.6, 5.5, 11.0, 5.9, 0.8),
    ];
    let sy = snap(rng.random_range(1.2..2.0)) + 0.5 * RES;
    let sx = snap(rng.random_range(2.6..3.1)) + 0.5 * RES;
    let spawn = AgentPose::new(Point2::new(sx, sy), 0);
    assemble(
        &format!("blocked-corridor-{seed}"),
        seed,
        bounds,
        vec![
            Room { id: 0, rect: Rect::new(0.0, 0.0, 6.0, 7.0) },
            Room { id: 1, rect: Rect::new(6.0, 0.0, 12.0, 7.0) },
        ],
        vec![Door { span: Rect::new(5.95, 5.2, 6.05, 6.4) }],
        obstacles,
        objects,
        vec![spawn],
    )
}

/// An inner room with no door, holding a "safe" far from its walls.
pub fn sealed_room() -> Scene {
    let bounds = Rect::new(0.0, 0.0, 12.0, 10.0);
    let t = 0.1;
    let mut obstacles = perimeter(bounds, t);
    let inner = Rect::new(5.0, 2.0, 11.0, 8.0);
    obstacles.push(wall(ObstacleKind::Wall, inner.min_x, inner.min_y, inner.max_x, inner.min_y + t));
    obstacles.push(wall(ObstacleKind::Wall, inner.min_x, inner.max_y - t, inner.max_x, inner.max_y));
    obstacles.push(wall(ObstacleKind::Wall, inner.min_x, inner.min_y, inner.min_x + t, inner.max_y));
    obstacles.push(wall(ObstacleKind::Wall, inner.max_x - t, inner.min_y, inner.max_x, inner.max_y));
    let objects = vec![object(0, "safe", 7.7, 4.7, 8.3, 5.3, 1.0), object(1, "chair", 2.0, 8.5, 2.5, 9.0, 0.9)];
    let spawn = AgentPose::new(Point2::new(2.025, 5.025), 0);
    assemble(
        "sealed-room",
        0,
        bounds,
        vec![Room { id: 0, rect: bounds }, Room { id: 1, rect: inner }],
        vec![],
        obstacles,
        objects,
        vec![spawn],
    )
}
