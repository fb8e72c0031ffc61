//! Accumulated semantic memory.
//!
//! Detections from one panorama are accumulated as 3D object clouds through
//! the overlap-threshold update rule, then flattened into the persistent 2D
//! object memory with IoU similarity and a maximum-weight assignment. The
//! 3D clouds are dropped after every fusion; 2D entries are never evicted.

mod hungarian;
mod overlap;

pub use hungarian::{hungarian_match, max_weight_assignment};
pub use overlap::{overlap_count, overlap_scores, residual_cloud, CloudIndex, OverlapError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Point3, Rect};
use crate::scene::StepFeedback;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPointCloud {
    pub class: String,
    pub pcd: Vec<Point3>,
}

impl ObjectPointCloud {
    /// Floor-plane bounding box of the cloud; `None` when empty.
    pub fn footprint(&self) -> Option<Rect> {
        let first = self.pcd.first()?;
        let mut r = Rect::new(first.x, first.y, first.x, first.y);
        for p in &self.pcd[1..] {
            r.min_x = r.min_x.min(p.x);
            r.min_y = r.min_y.min(p.y);
            r.max_x = r.max_x.max(p.x);
            r.max_y = r.max_y.max(p.y);
        }
        Some(r)
    }
}

/// 2D object entry; `bbox` is `[x_min, x_max, y_min, y_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMemoryEntry {
    pub class: String,
    pub center: Point2,
    pub bbox: [f64; 4],
}

impl ObjectMemoryEntry {
    pub fn rect(&self) -> Rect {
        Rect::new(self.bbox[0], self.bbox[2], self.bbox[1], self.bbox[3])
    }

    fn from_cloud(cloud: &ObjectPointCloud) -> Option<Self> {
        let r = cloud.footprint()?;
        Some(Self { class: cloud.class.clone(), center: r.center(), bbox: [r.min_x, r.max_x, r.min_y, r.max_y] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMemoryEntry {
    pub target: String,
    pub position: Point2,
    pub feedback: StepFeedback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryParams {
    /// Radius of the nearest-neighbor ball used by the overlap score.
    pub delta_overlap: f64,
    /// `max os*` below this means the candidate is a new object.
    pub new_object_below: f64,
    /// `os*` and `ros*` above this mean the candidate is the same object.
    pub merge_above: f64,
    /// Minimum residual size kept in the in-between case.
    pub min_residual_points: usize,
    /// Matches with lower IoU are treated as unmatched.
    pub match_threshold: f64,
}

impl Default for MemoryParams {
    fn default() -> Self {
        Self {
            delta_overlap: 0.05,
            new_object_below: 0.25,
            merge_above: 0.8,
            min_residual_points: 10,
            match_threshold: 0.3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryBank {
    pub object_memory: Vec<ObjectMemoryEntry>,
    pub target_memory: Vec<TargetMemoryEntry>,
    pub local_pc: Vec<ObjectPointCloud>,
    pub failure_notes: Vec<String>,
    pub subtask_status: Vec<bool>,
    /// Consecutive failed attempts on the most recent target.
    pub consecutive_failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateOutcome {
    Appended,
    Merged { index: usize },
    Discarded,
}

/// Apply the point-cloud update rule for one detection.
///
/// Recorded clouds are scanned in insertion order. The staged cloud starts
/// as the candidate and loses its points that overlap each scanned cloud.
/// A reference clearing both merge thresholds absorbs the staged residual,
/// takes the candidate's class, and ends the scan.
pub fn update_local(candidate: &ObjectPointCloud, bank: &mut MemoryBank, params: &MemoryParams) -> UpdateOutcome {
    if candidate.pcd.is_empty() {
        return UpdateOutcome::Discarded;
    }
    let mut staged: Vec<Point3> = candidate.pcd.clone();
    let mut max_os = 0.0_f64;
    for (index, reference) in bank.local_pc.iter_mut().enumerate() {
        if staged.is_empty() {
            break;
        }
        let ix = CloudIndex::new(&reference.pcd, params.delta_overlap);
        let overlapping: Vec<bool> = staged.iter().map(|p| ix.has_neighbor(*p)).collect();
        let count = overlapping.iter().filter(|o| **o).count() as f64;
        let os = count / staged.len() as f64;
        let ros = count / reference.pcd.len() as f64;
        max_os = max_os.max(os);
        let residual: Vec<Point3> =
            staged.iter().zip(&overlapping).filter(|(_, o)| !**o).map(|(p, _)| *p).collect();
        if os > params.merge_above && ros > params.merge_above {
            reference.pcd.extend(residual);
            reference.class = candidate.class.clone();
            return UpdateOutcome::Merged { index };
        }
        staged = residual;
    }
    let keep = if max_os < params.new_object_below {
        !staged.is_empty()
    } else {
        staged.len() >= params.min_residual_points
    };
    if keep {
        bank.local_pc.push(ObjectPointCloud { class: candidate.class.clone(), pcd: staged });
        UpdateOutcome::Appended
    } else {
        UpdateOutcome::Discarded
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum IouError {
    #[error("both boxes have zero area")]
    DegenerateBox,
}

/// Intersection over union of two floor-plane boxes.
pub fn bbox_iou(a: &Rect, b: &Rect) -> Result<f64, IouError> {
    let (aa, ab) = (a.area(), b.area());
    if aa <= 0.0 && ab <= 0.0 {
        return Err(IouError::DegenerateBox);
    }
    let inter = a.intersection_area(b);
    let union = aa + ab - inter;
    Ok(if union > 0.0 { (inter / union).clamp(0.0, 1.0) } else { 0.0 })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionReport {
    pub updated: Vec<usize>,
    pub appended: Vec<usize>,
}

/// `r` with any side shorter than `min_side` widened about its center. A
/// single visible face of an object taller than the camera has no depth.
fn matching_rect(r: &Rect, min_side: f64) -> Rect {
    let widen = |lo: f64, hi: f64| {
        let pad = 0.5 * (min_side - (hi - lo)).max(0.0);
        (lo - pad, hi + pad)
    };
    let (x0, x1) = widen(r.min_x, r.max_x);
    let (y0, y1) = widen(r.min_y, r.max_y);
    Rect::new(x0, y0, x1, y1)
}

/// Flatten the accumulated clouds into the 2D object memory and clear them.
pub fn fuse_to_global(bank: &mut MemoryBank, params: &MemoryParams) -> FusionReport {
    let candidates: Vec<ObjectMemoryEntry> =
        bank.local_pc.drain(..).filter_map(|c| ObjectMemoryEntry::from_cloud(&c)).collect();
    let mut report = FusionReport::default();
    if candidates.is_empty() {
        return report;
    }
    let similarity: Vec<Vec<f64>> = candidates
        .iter()
        .map(|c| {
            bank.object_memory
                .iter()
                .map(|m| {
                    let (a, b) = (matching_rect(&c.rect(), params.delta_overlap), matching_rect(&m.rect(), params.delta_overlap));
                    bbox_iou(&a, &b).unwrap_or(0.0)
                })
                .collect()
        })
        .collect();
    let mut matched = vec![None; candidates.len()];
    if !bank.object_memory.is_empty() {
        for (r, c) in hungarian_match(&similarity, params.match_threshold) {
            matched[r] = Some(c);
        }
    }
    for (cand, slot) in candidates.into_iter().zip(matched) {
        match slot {
            Some(idx) => {
                bank.object_memory[idx] = cand;
                report.updated.push(idx);
            }
            None => {
                report.appended.push(bank.object_memory.len());
                bank.object_memory.push(cand);
            }
        }
    }
    report
}

/// Append a planning outcome and maintain the consecutive-failure counter.
pub fn record_target(bank: &mut MemoryBank, target: &str, position: Point2, feedback: StepFeedback) {
    let same = bank.target_memory.last().is_some_and(|prev| prev.target == target);
    bank.consecutive_failures = if feedback.is_success() {
        0
    } else if same {
        bank.consecutive_failures + 1
    } else {
        1
    };
    bank.target_memory.push(TargetMemoryEntry { target: target.into(), position, feedback });
}

/// Per-step debug dump of both long-term banks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySnapshot {
    pub step: usize,
    pub object_memory: Vec<ObjectMemoryEntry>,
    pub target_memory: Vec<TargetMemoryEntry>,
}

impl MemoryBank {
    pub fn snapshot(&self, step: usize) -> MemorySnapshot {
        MemorySnapshot { step, object_memory: self.object_memory.clone(), target_memory: self.target_memory.clone() }
    }

    /// Accumulate one panorama's detections and fuse them.
    pub fn ingest(&mut self, detections: &[ObjectPointCloud], params: &MemoryParams) -> FusionReport {
        for d in detections {
            update_local(d, self, params);
        }
        fuse_to_global(self, params)
    }
}
