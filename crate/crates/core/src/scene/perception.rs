//! Ground-truth perception: the geometry a segmenter plus depth camera would
//! return, without rendering pixels.
//!
//! Each panorama has `views` headings spaced evenly around the agent. An
//! object is reported by the view whose horizontal sector contains the
//! bearing of its footprint center, with every surface sample that has a
//! clear line of sight from the camera and lies within sensing range.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AgentPose, Scene};
use crate::geometry::{wrap_degrees, Aabb, Point2, Point3, Rect};
use crate::masmap::ObjectPointCloud;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub views: usize,
    pub hfov_deg: f64,
    pub range: f64,
    /// Upper bound on reported points per object per view (300x300 image budget).
    pub max_points_per_view: usize,
    /// Spacing of synthesized floor and wall depth samples.
    pub depth_spacing: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self { views: 4, hfov_deg: 90.0, range: 5.0, max_points_per_view: 900, depth_spacing: 0.05 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Probability a detection is dropped.
    pub drop: f64,
    /// Standard deviation of per-axis point jitter, meters.
    pub jitter: f64,
    /// Probability a detection receives a wrong class from the scene's classes.
    pub mislabel: f64,
}

impl NoiseConfig {
    pub fn is_off(&self) -> bool {
        self.drop <= 0.0 && self.jitter <= 0.0 && self.mislabel <= 0.0
    }
}

/// One panoramic observation: per-object clouds plus raw depth geometry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub objects: Vec<ObjectPointCloud>,
    pub depth: Vec<Point3>,
}

impl Observation {
    pub fn capture(
        scene: &Scene,
        pose: &AgentPose,
        sensor: &SensorConfig,
        noise: &NoiseConfig,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Self {
            objects: sense_panorama(scene, pose, sensor, noise, rng),
            depth: sense_depth(scene, pose, sensor),
        }
    }
}

/// Index of the view whose sector contains `bearing_deg`, for a panorama
/// whose first view faces `yaw`.
pub fn view_of_bearing(yaw: i32, bearing_deg: f64, views: usize) -> usize {
    let views = views.max(1);
    let width = 360.0 / views as f64;
    let rel = wrap_degrees(bearing_deg - yaw as f64 + 0.5 * width);
    ((rel / width).floor() as usize).min(views - 1)
}

fn camera(pose: &AgentPose) -> Point3 {
    Point3::new(pose.position.x, pose.position.y, pose.z)
}

struct Occluders<'a> {
    boxes: Vec<&'a Aabb>,
}

impl<'a> Occluders<'a> {
    fn new(scene: &'a Scene, cam: Point3, range: f64) -> Self {
        let reach = Rect::new(cam.x - range, cam.y - range, cam.x + range, cam.y + range);
        let boxes = scene
            .obstacles
            .iter()
            .filter(|o| o.perceivable())
            .map(|o| &o.bounds)
            .chain(scene.objects.iter().map(|o| &o.bounds))
            .filter(|b| b.footprint().intersects(&reach))
            .collect();
        Self { boxes }
    }

    /// A point is visible when no box is entered strictly before reaching it.
    fn visible(&self, cam: Point3, p: Point3) -> bool {
        let seg = Rect::new(cam.x.min(p.x), cam.y.min(p.y), cam.x.max(p.x), cam.y.max(p.y));
        !self.boxes.iter().any(|b| {
            b.footprint().intersects(&seg) && b.segment_entry(cam, p).is_some_and(|t| t < 1.0 - 1e-9)
        })
    }
}

fn subsample<T: Copy>(items: Vec<T>, cap: usize) -> Vec<T> {
    if items.len() <= cap || cap == 0 {
        return items;
    }
    let n = items.len();
    (0..cap).map(|k| items[k * n / cap]).collect()
}

/// Per-object point clouds of everything visible from `pose`.
pub fn sense_panorama(
    scene: &Scene,
    pose: &AgentPose,
    sensor: &SensorConfig,
    noise: &NoiseConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<ObjectPointCloud> {
    let cam = camera(pose);
    let occluders = Occluders::new(scene, cam, sensor.range);
    let labels = scene.classes();
    let jitter = (noise.jitter > 0.0).then(|| Normal::new(0.0, noise.jitter).expect("finite jitter"));
    let range_sq = sensor.range * sensor.range;

    let mut per_view: Vec<Vec<ObjectPointCloud>> = vec![Vec::new(); sensor.views.max(1)];
    for obj in &scene.objects {
        let c = obj.bounds.footprint().center();
        let bearing = (c.y - cam.y).atan2(c.x - cam.x).to_degrees();
        let view = view_of_bearing(pose.yaw, bearing, sensor.views);
        let pts: Vec<Point3> = obj
            .surface_points
            .iter()
            .copied()
            .filter(|p| p.distance_sq(cam) <= range_sq && occluders.visible(cam, *p))
            .collect();
        if pts.is_empty() {
            continue;
        }
        per_view[view].push(ObjectPointCloud {
            class: obj.class.clone(),
            pcd: subsample(pts, sensor.max_points_per_view),
        });
    }

    let mut out = Vec::new();
    for cloud in per_view.into_iter().flatten() {
        let mut cloud = cloud;
        if noise.drop > 0.0 && rng.random_bool(noise.drop.min(1.0)) {
            continue;
        }
        if noise.mislabel > 0.0 && labels.len() > 1 && rng.random_bool(noise.mislabel.min(1.0)) {
            let others: Vec<&String> = labels.iter().filter(|l| **l != cloud.class).collect();
            cloud.class = others[rng.random_range(0..others.len())].clone();
        }
        if let Some(dist) = &jitter {
            for p in &mut cloud.pcd {
                p.x += dist.sample(rng);
                p.y += dist.sample(rng);
                p.z += dist.sample(rng);
            }
        }
        out.push(cloud);
    }
    out
}

/// Depth geometry around the agent: visible floor samples (z = 0) and
/// samples on the side faces of perceivable walls and objects.
pub fn sense_depth(scene: &Scene, pose: &AgentPose, sensor: &SensorConfig) -> Vec<Point3> {
    let cam = camera(pose);
    let occluders = Occluders::new(scene, cam, sensor.range);
    let range_sq = sensor.range * sensor.range;
    let s = sensor.depth_spacing;
    let b = scene.bounds;
    let mut out = Vec::new();

    let reach = (range_sq - cam.z * cam.z).max(0.0).sqrt();
    let i0 = ((cam.x - reach - b.min_x) / s).floor().max(0.0) as i64;
    let i1 = ((cam.x + reach - b.min_x) / s).ceil().min((b.width() / s).floor()) as i64;
    let j0 = ((cam.y - reach - b.min_y) / s).floor().max(0.0) as i64;
    let j1 = ((cam.y + reach - b.min_y) / s).ceil().min((b.height() / s).floor()) as i64;
    for j in j0..j1 {
        for i in i0..i1 {
            let p = Point3::new(b.min_x + (i as f64 + 0.5) * s, b.min_y + (j as f64 + 0.5) * s, 0.0);
            if p.distance_sq(cam) <= range_sq && occluders.visible(cam, p) {
                out.push(p);
            }
        }
    }

    let solids = scene
        .obstacles
        .iter()
        .filter(|o| o.perceivable())
        .map(|o| o.bounds)
        .chain(scene.objects.iter().map(|o| o.bounds));
    for bx in solids {
        if bx.footprint().distance_to_point(pose.position) > sensor.range {
            continue;
        }
        for p in side_samples(&bx, s) {
            if p.distance_sq(cam) <= range_sq && occluders.visible(cam, p) {
                out.push(p);
            }
        }
    }
    out
}

fn side_samples(b: &Aabb, spacing: f64) -> Vec<Point3> {
    let h = b.max.z - b.min.z;
    let mut heights: Vec<f64> = Vec::new();
    let mut z = b.min.z + 0.3;
    while z <= b.max.z {
        heights.push(z);
        z += 0.6;
    }
    if heights.is_empty() {
        heights.push(b.min.z + 0.5 * h);
    }
    if b.max.z > 2.2 {
        heights.push(2.2);
    }
    let fp = b.footprint();
    let along = |lo: f64, len: f64| {
        let n = ((len / spacing).round() as usize).max(1);
        (0..n).map(move |k| lo + (k as f64 + 0.5) * len / n as f64)
    };
    let mut pts = Vec::new();
    for &z in &heights {
        for x in along(fp.min_x, fp.width()) {
            pts.push(Point3::new(x, fp.min_y, z));
            pts.push(Point3::new(x, fp.max_y, z));
        }
        for y in along(fp.min_y, fp.height()) {
            pts.push(Point3::new(fp.min_x, y, z));
            pts.push(Point3::new(fp.max_x, y, z));
        }
    }
    pts
}

/// True when the object's footprint center lies inside the agent's current
/// forward field of view and at least one of its samples is visible.
pub(crate) fn in_forward_view(scene: &Scene, pose: &AgentPose, sensor: &SensorConfig, object: usize) -> bool {
    let obj = &scene.objects[object];
    let cam = camera(pose);
    let c: Point2 = obj.bounds.footprint().center();
    let bearing = (c.y - cam.y).atan2(c.x - cam.x).to_degrees();
    let rel = crate::geometry::angle_diff_degrees(pose.yaw as f64, bearing);
    if rel.abs() > 0.5 * sensor.hfov_deg {
        return false;
    }
    let occluders = Occluders::new(scene, cam, sensor.range);
    let range_sq = sensor.range * sensor.range;
    obj.surface_points
        .iter()
        .any(|p| p.distance_sq(cam) <= range_sq && occluders.visible(cam, *p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{scripted, Obstacle, ObstacleKind};
    use rand::SeedableRng;

    fn chair_scene() -> Scene {
        let mut scene = scripted::empty_room(6.0, 6.0);
        scene.objects.push(scripted::object(0, "chair", 3.8, 2.8, 4.3, 3.3, 0.9));
        scene
    }

    #[test]
    fn adjacent_chair_is_one_cloud_on_its_box() {
        let scene = chair_scene();
        let pose = AgentPose::new(Point2::new(3.0, 3.0), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let clouds = sense_panorama(&scene, &pose, &SensorConfig::default(), &NoiseConfig::default(), &mut rng);
        assert_eq!(clouds.len(), 1);
        assert_eq!(clouds[0].class, "chair");
        let b = scene.objects[0].bounds;
        assert!(clouds[0].pcd.iter().all(|p| b.surface_distance(*p) < 1e-9));
        // The far side face is self-occluded.
        assert!(clouds[0].pcd.iter().all(|p| p.x < 4.3 - 1e-9 || p.z >= 0.9 - 1e-9));
    }

    #[test]
    fn object_behind_wall_is_absent() {
        let mut scene = chair_scene();
        scene.obstacles.push(Obstacle {
            kind: ObstacleKind::Wall,
            bounds: Aabb::new(Point3::new(3.5, 0.5, 0.0), Point3::new(3.6, 5.5, 2.5)),
        });
        let pose = AgentPose::new(Point2::new(3.0, 3.0), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let clouds = sense_panorama(&scene, &pose, &SensorConfig::default(), &NoiseConfig::default(), &mut rng);
        assert!(clouds.is_empty());
    }

    #[test]
    fn glass_neither_occludes_nor_appears_in_depth() {
        let mut scene = chair_scene();
        scene.obstacles.push(Obstacle {
            kind: ObstacleKind::Glass,
            bounds: Aabb::new(Point3::new(3.5, 0.5, 0.0), Point3::new(3.6, 5.5, 2.5)),
        });
        let pose = AgentPose::new(Point2::new(3.0, 3.0), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let clouds = sense_panorama(&scene, &pose, &SensorConfig::default(), &NoiseConfig::default(), &mut rng);
        assert_eq!(clouds.len(), 1);
        let depth = sense_depth(&scene, &pose, &SensorConfig::default());
        assert!(!depth.iter().any(|p| p.z > 0.0 && p.x > 3.49 && p.x < 3.61));
    }

    #[test]
    fn full_drop_empties_output() {
        let scene = chair_scene();
        let pose = AgentPose::new(Point2::new(3.0, 3.0), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let noise = NoiseConfig { drop: 1.0, ..NoiseConfig::default() };
        assert!(sense_panorama(&scene, &pose, &SensorConfig::default(), &noise, &mut rng).is_empty());
    }

    #[test]
    fn out_of_range_objects_are_not_seen() {
        let mut scene = scripted::empty_room(12.0, 4.0);
        scene.objects.push(scripted::object(0, "sofa", 10.0, 1.5, 11.0, 2.5, 0.8));
        let pose = AgentPose::new(Point2::new(1.0, 2.0), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sense_panorama(&scene, &pose, &SensorConfig::default(), &NoiseConfig::default(), &mut rng).is_empty());
    }

    #[test]
    fn views_partition_the_circle() {
        assert_eq!(view_of_bearing(0, 0.0, 4), 0);
        assert_eq!(view_of_bearing(0, 44.9, 4), 0);
        assert_eq!(view_of_bearing(0, 45.0, 4), 1);
        assert_eq!(view_of_bearing(0, -44.0, 4), 0);
        assert_eq!(view_of_bearing(90, 0.0, 4), 3);
        assert_eq!(view_of_bearing(0, 180.0, 4), 2);
    }

    #[test]
    fn floor_under_objects_is_not_observed() {
        let scene = chair_scene();
        let pose = AgentPose::new(Point2::new(3.0, 3.0), 0);
        let depth = sense_depth(&scene, &pose, &SensorConfig::default());
        let fp = scene.objects[0].bounds.footprint();
        assert!(depth.iter().filter(|p| p.z == 0.0).all(|p| !fp.inflate(-1e-6).contains(p.xy())));
        assert!(depth.iter().any(|p| p.z > 0.0));
    }
}
