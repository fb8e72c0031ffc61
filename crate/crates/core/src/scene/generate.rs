//! Procedural multi-room scene generation.
//!
//! Rooms come from a guillotine split of the scene bounds. Every split wall
//! carries one door, so the room graph is a tree and always connected.
//! Objects are placed per room with rejection sampling and kept apart from
//! walls, doors and each other.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    grid::NavGrid, AgentPose, Door, Obstacle, ObstacleKind, Room, Scene, SceneError, SceneObject,
    AGENT_RADIUS, SCENE_SCHEMA_VERSION,
};
use crate::geometry::{Aabb, Point2, Point3, Rect};

pub const SCENE_CONFIG_SCHEMA_VERSION: u32 = 1;
const MAX_LAYOUT_ATTEMPTS: usize = 16;
const MAX_PLACEMENT_TRIES: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectClassSpec {
    pub class: String,
    /// Minimum (width, depth, height), meters.
    pub size_min: [f64; 3],
    /// Maximum (width, depth, height), meters.
    pub size_max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGenConfig {
    pub schema_version: u32,
    pub width: f64,
    pub depth: f64,
    pub room_count: [usize; 2],
    pub min_room_side: f64,
    pub door_width: f64,
    pub wall_thickness: f64,
    pub wall_height: f64,
    pub objects_per_room: [usize; 2],
    /// Minimum free gap between two object footprints.
    pub object_gap: f64,
    /// Minimum gap between an object footprint and a wall or the bounds.
    pub wall_clearance: f64,
    pub spawn_count: usize,
    pub resolution: f64,
    pub surface_spacing: f64,
    pub catalog: Vec<ObjectClassSpec>,
}

fn spec(class: &str, min: [f64; 3], max: [f64; 3]) -> ObjectClassSpec {
    ObjectClassSpec { class: class.into(), size_min: min, size_max: max }
}

pub fn default_catalog() -> Vec<ObjectClassSpec> {
    vec![
        spec("sofa", [0.8, 0.6, 0.6], [1.0, 0.8, 0.9]),
        spec("bed", [0.9, 0.9, 0.5], [1.0, 1.0, 0.7]),
        spec("armchair", [0.5, 0.5, 0.7], [0.7, 0.7, 0.9]),
        spec("chair", [0.4, 0.4, 0.8], [0.5, 0.5, 1.0]),
        spec("dining table", [0.8, 0.6, 0.7], [1.0, 0.9, 0.8]),
        spec("desk", [0.8, 0.5, 0.7], [1.0, 0.6, 0.8]),
        spec("floor lamp", [0.3, 0.3, 1.0], [0.4, 0.4, 1.2]),
        spec("fridge", [0.6, 0.6, 1.1], [0.8, 0.7, 1.2]),
        spec("microwave", [0.5, 0.4, 0.3], [0.6, 0.5, 0.4]),
        spec("television", [0.8, 0.3, 0.6], [1.0, 0.4, 0.9]),
        spec("bookshelf", [0.7, 0.3, 1.0], [1.0, 0.4, 1.2]),
        spec("houseplant", [0.3, 0.3, 0.5], [0.5, 0.5, 1.0]),
        spec("sink", [0.5, 0.4, 0.8], [0.7, 0.5, 0.9]),
        spec("washing machine", [0.6, 0.6, 0.8], [0.7, 0.6, 0.9]),
        spec("cabinet", [0.6, 0.4, 0.8], [1.0, 0.5, 1.1]),
        spec("bathtub", [0.9, 0.6, 0.5], [1.0, 0.7, 0.6]),
    ]
}

impl Default for SceneGenConfig {
    fn default() -> Self {
        Self {
            schema_version: SCENE_CONFIG_SCHEMA_VERSION,
            width: 10.0,
            depth: 8.0,
            room_count: [2, 4],
            min_room_side: 3.0,
            door_width: 1.2,
            wall_thickness: 0.1,
            wall_height: 2.5,
            objects_per_room: [2, 4],
            object_gap: 0.9,
            wall_clearance: 0.5,
            spawn_count: 4,
            resolution: 0.05,
            surface_spacing: 0.05,
            catalog: default_catalog(),
        }
    }
}

impl SceneGenConfig {
    pub fn single_room() -> Self {
        Self { width: 6.0, depth: 5.0, room_count: [1, 1], objects_per_room: [3, 5], ..Self::default() }
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let cfg: SceneGenConfig = serde_json::from_str(text)?;
        if cfg.schema_version != SCENE_CONFIG_SCHEMA_VERSION {
            return Err(SceneError::SchemaVersion {
                found: cfg.schema_version,
                expected: SCENE_CONFIG_SCHEMA_VERSION,
            });
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), SceneError> {
        let infeasible = |m: &str| Err(SceneError::ConfigInfeasible(m.into()));
        let positive = [
            self.width,
            self.depth,
            self.min_room_side,
            self.door_width,
            self.wall_thickness,
            self.wall_height,
            self.resolution,
            self.surface_spacing,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return infeasible("all lengths must be positive and finite");
        }
        if self.room_count[0] == 0 || self.room_count[0] > self.room_count[1] {
            return infeasible("room_count must be a non-empty range starting at 1 or more");
        }
        if self.objects_per_room[0] > self.objects_per_room[1] {
            return infeasible("objects_per_room must be an ordered range");
        }
        if self.catalog.is_empty() && self.objects_per_room[1] > 0 {
            return infeasible("objects requested but the catalog is empty");
        }
        for c in &self.catalog {
            let ok = c.size_min.iter().zip(&c.size_max).all(|(a, b)| *a > 0.0 && a <= b && b.is_finite());
            if c.class.is_empty() || !ok {
                return infeasible("catalog entries need a class and ordered positive sizes");
            }
        }
        let cells = (self.width / self.resolution) * (self.depth / self.resolution);
        if cells > 4.0e6 {
            return infeasible("navigable grid would exceed four million cells");
        }
        let max_rooms = ((self.width / self.min_room_side).floor() * (self.depth / self.min_room_side).floor()) as usize;
        if self.room_count[0] > max_rooms.max(1) || self.min_room_side > self.width.max(self.depth) {
            return infeasible("rooms cannot fit in bounds");
        }
        if self.door_width + 2.0 * AGENT_RADIUS > self.min_room_side {
            return infeasible("door wider than the smallest room side");
        }
        Ok(())
    }
}

/// Generate a scene, deterministic in `(seed, config)`.
pub fn generate_scene(seed: u64, config: &SceneGenConfig) -> Result<Scene, SceneError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = Rect::new(0.0, 0.0, config.width, config.depth);
    let mut last_err = SceneError::ConfigInfeasible("no layout attempt made".into());
    for _ in 0..MAX_LAYOUT_ATTEMPTS {
        match try_layout(&mut rng, seed, bounds, config) {
            Ok(scene) => return Ok(scene),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

fn snap(v: f64, res: f64) -> f64 {
    (v / res).round() * res
}

fn try_layout(rng: &mut ChaCha8Rng, seed: u64, bounds: Rect, cfg: &SceneGenConfig) -> Result<Scene, SceneError> {
    let target_rooms = rng.random_range(cfg.room_count[0]..=cfg.room_count[1]);
    let mut regions = vec![bounds];
    let mut walls: Vec<Rect> = Vec::new();
    let mut doors: Vec<Door> = Vec::new();

    while regions.len() < target_rooms {
        let mut order: Vec<usize> = (0..regions.len()).collect();
        order.sort_by(|a, b| regions[*b].area().total_cmp(&regions[*a].area()).then(a.cmp(b)));
        let mut split = None;
        'regions: for idx in order {
            let r = regions[idx];
            let vertical = r.width() >= r.height();
            let (lo, hi) = if vertical { (r.min_x, r.max_x) } else { (r.min_y, r.max_y) };
            if hi - lo < 2.0 * cfg.min_room_side {
                continue;
            }
            for _ in 0..24 {
                let pos = snap(lo + (hi - lo) * rng.random_range(0.35..0.65), cfg.resolution);
                if pos - lo < cfg.min_room_side || hi - pos < cfg.min_room_side {
                    continue;
                }
                let half = 0.5 * cfg.wall_thickness;
                let line = if vertical {
                    Rect::new(pos - half, r.min_y, pos + half, r.max_y)
                } else {
                    Rect::new(r.min_x, pos - half, r.max_x, pos + half)
                };
                let keepout = 2.0 * AGENT_RADIUS + 0.3;
                if doors.iter().any(|d| d.span.inflate(keepout).intersects(&line)) {
                    continue;
                }
                split = Some((idx, vertical, pos));
                break 'regions;
            }
        }
        let Some((idx, vertical, pos)) = split else {
            return Err(SceneError::ConfigInfeasible(format!(
                "cannot fit {target_rooms} rooms of side {} in bounds",
                cfg.min_room_side
            )));
        };
        let r = regions.swap_remove(idx);
        let half = 0.5 * cfg.wall_thickness;
        let (span_lo, span_hi) = if vertical { (r.min_y, r.max_y) } else { (r.min_x, r.max_x) };
        let margin = 0.5 * cfg.door_width + 0.3;
        let door_c = if span_hi - span_lo > 2.0 * margin {
            snap(rng.random_range((span_lo + margin)..(span_hi - margin)), cfg.resolution)
        } else {
            snap(0.5 * (span_lo + span_hi), cfg.resolution)
        };
        let (d0, d1) = (door_c - 0.5 * cfg.door_width, door_c + 0.5 * cfg.door_width);
        if vertical {
            walls.push(Rect::new(pos - half, span_lo, pos + half, d0));
            walls.push(Rect::new(pos - half, d1, pos + half, span_hi));
            doors.push(Door { span: Rect::new(pos - half, d0, pos + half, d1) });
            regions.push(Rect::new(r.min_x, r.min_y, pos, r.max_y));
            regions.push(Rect::new(pos, r.min_y, r.max_x, r.max_y));
        } else {
            walls.push(Rect::new(span_lo, pos - half, d0, pos + half));
            walls.push(Rect::new(d1, pos - half, span_hi, pos + half));
            doors.push(Door { span: Rect::new(d0, pos - half, d1, pos + half) });
            regions.push(Rect::new(r.min_x, r.min_y, r.max_x, pos));
            regions.push(Rect::new(r.min_x, pos, r.max_x, r.max_y));
        }
    }
    regions.sort_by(|a, b| a.min_y.total_cmp(&b.min_y).then(a.min_x.total_cmp(&b.min_x)));
    let rooms: Vec<Room> = regions.iter().enumerate().map(|(id, rect)| Room { id, rect: *rect }).collect();

    let mut obstacles = super::scripted::perimeter(bounds, cfg.wall_thickness);
    obstacles.extend(walls
        .iter()
        .filter(|w| w.area() > 0.0)
        .map(|w| Obstacle {
            kind: ObstacleKind::Wall,
            bounds: Aabb::new(Point3::new(w.min_x, w.min_y, 0.0), Point3::new(w.max_x, w.max_y, cfg.wall_height)),
        }));

    let mut objects: Vec<SceneObject> = Vec::new();
    for room in &rooms {
        let count = rng.random_range(cfg.objects_per_room[0]..=cfg.objects_per_room[1]);
        let area = room.rect.inflate(-(cfg.wall_thickness + cfg.wall_clearance));
        for _ in 0..count {
            let class_spec = &cfg.catalog[rng.random_range(0..cfg.catalog.len())];
            let mut dims = [0.0; 3];
            for (k, d) in dims.iter_mut().enumerate() {
                let (a, b) = (class_spec.size_min[k], class_spec.size_max[k]);
                *d = snap(if a < b { rng.random_range(a..=b) } else { a }, cfg.resolution).max(cfg.resolution);
            }
            if rng.random_bool(0.5) {
                dims.swap(0, 1);
            }
            for _ in 0..MAX_PLACEMENT_TRIES {
                if area.width() < dims[0] || area.height() < dims[1] {
                    break;
                }
                let x0 = snap(rng.random_range(area.min_x..=(area.max_x - dims[0])), cfg.resolution);
                let y0 = snap(rng.random_range(area.min_y..=(area.max_y - dims[1])), cfg.resolution);
                let fp = Rect::new(x0, y0, x0 + dims[0], y0 + dims[1]);
                if !area.inflate(1e-9).contains_rect(&fp) {
                    continue;
                }
                let near_door = doors.iter().any(|d| d.span.inflate(1.0).intersects(&fp));
                let near_object = objects
                    .iter()
                    .any(|o| o.bounds.footprint().inflate(cfg.object_gap).intersects(&fp));
                if near_door || near_object {
                    continue;
                }
                let bounds = Aabb::new(Point3::new(fp.min_x, fp.min_y, 0.0), Point3::new(fp.max_x, fp.max_y, dims[2]));
                objects.push(SceneObject {
                    id: objects.len(),
                    class: class_spec.class.clone(),
                    bounds,
                    surface_points: sample_surface(&bounds, cfg.surface_spacing),
                });
                break;
            }
        }
    }

    let mut grid = rasterize_navigable(bounds, cfg.resolution, &obstacles, &objects);
    let free = grid.count();
    grid.retain_largest_component();
    if free == 0 || (grid.count() as f64) < 0.9 * free as f64 {
        return Err(SceneError::ConfigInfeasible("free space is fragmented".into()));
    }
    let cells: Vec<_> = grid.navigable_cells().collect();
    let spawns = (0..cfg.spawn_count.max(1))
        .map(|_| {
            let c = cells[rng.random_range(0..cells.len())];
            AgentPose::new(grid.cell_center(c), 30 * rng.random_range(0..12))
        })
        .collect();

    Ok(Scene {
        schema_version: SCENE_SCHEMA_VERSION,
        id: format!("scene-{seed:08x}"),
        seed,
        bounds,
        rooms,
        doors,
        obstacles,
        objects,
        navigable_grid: grid,
        spawns,
    })
}

/// Cells whose collision disc fits inside the bounds and clears every footprint.
pub(crate) fn rasterize_navigable(bounds: Rect, res: f64, obstacles: &[Obstacle], objects: &[SceneObject]) -> NavGrid {
    let width = (bounds.width() / res).round() as usize;
    let height = (bounds.height() / res).round() as usize;
    let mut grid = NavGrid::new(Point2::new(bounds.min_x, bounds.min_y), res, width, height);
    let rects: Vec<Rect> = obstacles
        .iter()
        .map(|o| o.bounds.footprint())
        .chain(objects.iter().map(|o| o.bounds.footprint()))
        .collect();
    for j in 0..height {
        for i in 0..width {
            let c = grid.cell_center((i, j));
            let inside = c.x - AGENT_RADIUS >= bounds.min_x
                && c.x + AGENT_RADIUS <= bounds.max_x
                && c.y - AGENT_RADIUS >= bounds.min_y
                && c.y + AGENT_RADIUS <= bounds.max_y;
            if inside && rects.iter().all(|r| r.distance_to_point(c) >= AGENT_RADIUS) {
                grid.set((i, j), true);
            }
        }
    }
    grid
}

/// Lattice samples on every face except the bottom one.
pub(crate) fn sample_surface(b: &Aabb, spacing: f64) -> Vec<Point3> {
    let (w, d, h) = (b.max.x - b.min.x, b.max.y - b.min.y, b.max.z - b.min.z);
    let n = |len: f64| ((len / spacing).round() as usize).max(1);
    let at = |lo: f64, len: f64, k: usize, count: usize| lo + (k as f64 + 0.5) * len / count as f64;
    let (nx, ny, nz) = (n(w), n(d), n(h));
    let mut pts = Vec::with_capacity(nx * ny + 2 * nz * (nx + ny));
    for i in 0..nx {
        for j in 0..ny {
            pts.push(Point3::new(at(b.min.x, w, i, nx), at(b.min.y, d, j, ny), b.max.z));
        }
    }
    for k in 0..nz {
        let z = at(b.min.z, h, k, nz);
        for i in 0..nx {
            let x = at(b.min.x, w, i, nx);
            pts.push(Point3::new(x, b.min.y, z));
            pts.push(Point3::new(x, b.max.y, z));
        }
        for j in 0..ny {
            let y = at(b.min.y, d, j, ny);
            pts.push(Point3::new(b.min.x, y, z));
            pts.push(Point3::new(b.max.x, y, z));
        }
    }
    pts
}
