//! SVG rendering of a scene with an episode trajectory on top.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::{Point2, Rect};
use crate::orchestrator::{header, steps, DecisionKind, TraceError, TraceRecord};
use crate::planner::{grid_from_masks, AffordanceMap, GridSpec};
use crate::scene::{ObstacleKind, Scene};

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("trace belongs to scene {trace}, not {scene}")]
    MismatchedScene { trace: String, scene: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    /// Pixels per meter.
    pub scale: f64,
    /// Draw the fused affordance layer of the ground-truth map.
    pub affordance: bool,
    /// Affordance target; defaults to the last located target, else the
    /// final pose.
    pub affordance_target: Option<Point2>,
    pub resolution: f64,
    pub dilation_radius: f64,
    pub tau_obs: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            scale: 60.0,
            affordance: false,
            affordance_target: None,
            resolution: 0.05,
            dilation_radius: 0.2,
            tau_obs: 0.25,
        }
    }
}

/// Fill for an affordance value: 0 is near-black, higher values are redder.
pub fn affordance_color(a: f64) -> String {
    if a <= 0.0 {
        return "#1e1e1e".to_string();
    }
    let t = a.clamp(0.0, 1.0);
    let gb = (235.0 * (1.0 - t)).round() as u8;
    format!("#ff{gb:02x}{gb:02x}")
}

/// Affordance over the scene's exact collision footprints.
pub fn ground_truth_affordance(scene: &Scene, target: Point2, opts: &RenderOptions) -> AffordanceMap {
    let spec = GridSpec::covering(scene.bounds, opts.resolution);
    let rects: Vec<Rect> = scene.collision_rects().collect();
    let obstacle: Vec<bool> = (0..spec.len()).map(|k| rects.iter().any(|r| r.contains(spec.center(spec.cell(k))))).collect();
    let navigable: Vec<bool> = obstacle.iter().map(|o| !o).collect();
    AffordanceMap::compute(grid_from_masks(spec, &navigable, &obstacle, opts.dilation_radius), target, opts.tau_obs)
}

fn last_target(records: &[TraceRecord]) -> Option<Point2> {
    records.iter().rev().find_map(|r| match r {
        TraceRecord::Decision(d) => match &d.kind {
            DecisionKind::Locate { decision: Some(l), .. } => Some(l.target_position),
            _ => None,
        },
        _ => None,
    })
}

struct Canvas {
    bounds: Rect,
    scale: f64,
}

impl Canvas {
    fn x(&self, x: f64) -> f64 {
        (x - self.bounds.min_x) * self.scale
    }

    // SVG's y axis points down.
    fn y(&self, y: f64) -> f64 {
        (self.bounds.max_y - y) * self.scale
    }

    fn rect(&self, out: &mut String, r: &Rect, attrs: &str) {
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" {attrs}/>"#,
            self.x(r.min_x),
            self.y(r.max_y),
            r.width() * self.scale,
            r.height() * self.scale
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_svg(scene: &Scene, records: &[TraceRecord], opts: &RenderOptions) -> Result<String, RenderError> {
    let h = header(records).ok_or(TraceError::MissingHeader)?;
    if h.scene_id != scene.id {
        return Err(RenderError::MismatchedScene { trace: h.scene_id.clone(), scene: scene.id.clone() });
    }
    let c = Canvas { bounds: scene.bounds, scale: opts.scale };
    let (w, ht) = (scene.bounds.width() * opts.scale, scene.bounds.height() * opts.scale);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{ht:.0}" viewBox="0 0 {w:.2} {ht:.2}">"#
    );
    let _ = writeln!(out, r#"<title>{} / {}</title>"#, escape(&scene.id), escape(&h.task_id));
    c.rect(&mut out, &scene.bounds, r##"class="background" fill="#9a9a9a""##);
    for room in &scene.rooms {
        c.rect(&mut out, &room.rect, r##"class="room" fill="#f4f1ea""##);
    }

    if opts.affordance {
        let target = opts.affordance_target.or_else(|| last_target(records)).unwrap_or_else(|| {
            steps(records).last().map_or(h.spawn.position, |s| s.pose.position)
        });
        let map = ground_truth_affordance(scene, target, opts);
        let spec = *map.spec();
        out.push_str("<g class=\"affordance\">\n");
        for k in 0..spec.len() {
            let p = spec.center(spec.cell(k));
            let half = spec.resolution / 2.0;
            let cell = Rect::new(p.x - half, p.y - half, p.x + half, p.y + half);
            let fill = affordance_color(map.a_final[k]);
            c.rect(&mut out, &cell, &format!(r#"class="cell" fill="{fill}""#));
        }
        out.push_str("</g>\n");
    }

    for o in &scene.obstacles {
        let attrs = match o.kind {
            ObstacleKind::Wall => r##"class="obstacle wall" fill="#3b3b3b""##,
            ObstacleKind::Glass => r##"class="obstacle glass" fill="#7fc8f8" fill-opacity="0.6""##,
        };
        c.rect(&mut out, &o.bounds.footprint(), attrs);
    }
    for o in &scene.objects {
        let r = o.bounds.footprint();
        c.rect(&mut out, &r, r##"class="object" fill="#6a8fbf" stroke="#2c4a73" stroke-width="1""##);
        let at = r.center();
        let _ = writeln!(
            out,
            r#"<text class="label" x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#,
            c.x(at.x),
            c.y(at.y),
            escape(&o.class)
        );
    }

    let mut points = vec![h.spawn.position];
    points.extend(steps(records).map(|s| s.pose.position));
    let coords: Vec<String> = points.iter().map(|p| format!("{:.2},{:.2}", c.x(p.x), c.y(p.y))).collect();
    let _ = writeln!(
        out,
        r##"<polyline class="trajectory" fill="none" stroke="#d1495b" stroke-width="2" points="{}"/>"##,
        coords.join(" ")
    );
    let _ = writeln!(
        out,
        r##"<circle class="spawn" cx="{:.2}" cy="{:.2}" r="5" fill="#2a9d8f"/>"##,
        c.x(h.spawn.position.x),
        c.y(h.spawn.position.y)
    );
    for r in records {
        if let TraceRecord::Correction(k) = r {
            let _ = writeln!(
                out,
                r##"<circle class="correction" cx="{:.2}" cy="{:.2}" r="6" fill="none" stroke="#f4a261" stroke-width="2"/>"##,
                c.x(k.pose.position.x),
                c.y(k.pose.position.y)
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}
