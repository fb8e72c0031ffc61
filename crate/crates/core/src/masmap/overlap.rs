//! Point-cloud overlap by delta-ball nearest-neighbor counting.

use std::collections::HashMap;

use thiserror::Error;

use super::ObjectPointCloud;
use crate::geometry::Point3;

#[derive(Debug, Error, PartialEq)]
pub enum OverlapError {
    #[error("overlap requires non-empty point clouds")]
    EmptyCloud,
}

type Key = (i64, i64, i64);

/// Voxel hash over a reference cloud with voxel edge `delta`, so every
/// neighbor within `delta` lives in the 27 surrounding voxels.
pub struct CloudIndex<'a> {
    points: &'a [Point3],
    delta: f64,
    voxels: HashMap<Key, Vec<usize>>,
    min: Point3,
    max: Point3,
}

impl<'a> CloudIndex<'a> {
    pub fn new(points: &'a [Point3], delta: f64) -> Self {
        let mut voxels: HashMap<Key, Vec<usize>> = HashMap::new();
        let mut min = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (k, p) in points.iter().enumerate() {
            voxels.entry(key(*p, delta)).or_default().push(k);
            min = Point3::new(min.x.min(p.x), min.y.min(p.y), min.z.min(p.z));
            max = Point3::new(max.x.max(p.x), max.y.max(p.y), max.z.max(p.z));
        }
        Self { points, delta, voxels, min, max }
    }

    /// Whether some indexed point lies within `delta` of `p` (inclusive).
    pub fn has_neighbor(&self, p: Point3) -> bool {
        let d = self.delta;
        if p.x < self.min.x - d
            || p.x > self.max.x + d
            || p.y < self.min.y - d
            || p.y > self.max.y + d
            || p.z < self.min.z - d
            || p.z > self.max.z + d
        {
            return false;
        }
        let (kx, ky, kz) = key(p, d);
        let d2 = d * d;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.voxels.get(&(kx + dx, ky + dy, kz + dz)) {
                        if ids.iter().any(|&i| self.points[i].distance_sq(p) <= d2) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

fn key(p: Point3, delta: f64) -> Key {
    ((p.x / delta).floor() as i64, (p.y / delta).floor() as i64, (p.z / delta).floor() as i64)
}

/// Number of candidate points within `delta` of some reference point.
pub fn overlap_count(candidate: &[Point3], reference: &CloudIndex<'_>) -> usize {
    candidate.iter().filter(|p| reference.has_neighbor(**p)).count()
}

/// `(os, ros)`: the overlap count normalized by the candidate's and the
/// reference's point counts.
pub fn overlap_scores(
    candidate: &ObjectPointCloud,
    reference: &ObjectPointCloud,
    delta: f64,
) -> Result<(f64, f64), OverlapError> {
    if candidate.pcd.is_empty() || reference.pcd.is_empty() {
        return Err(OverlapError::EmptyCloud);
    }
    let index = CloudIndex::new(&reference.pcd, delta);
    let n = overlap_count(&candidate.pcd, &index) as f64;
    Ok((n / candidate.pcd.len() as f64, n / reference.pcd.len() as f64))
}

/// Candidate points farther than `delta` from every recorded cloud.
pub fn residual_cloud(candidate: &ObjectPointCloud, recorded: &[ObjectPointCloud], delta: f64) -> ObjectPointCloud {
    let indices: Vec<CloudIndex<'_>> = recorded.iter().map(|r| CloudIndex::new(&r.pcd, delta)).collect();
    ObjectPointCloud {
        class: candidate.class.clone(),
        pcd: candidate
            .pcd
            .iter()
            .copied()
            .filter(|p| !indices.iter().any(|ix| ix.has_neighbor(*p)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cloud(pts: &[(f64, f64, f64)]) -> ObjectPointCloud {
        ObjectPointCloud { class: "x".into(), pcd: pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect() }
    }

    /// Brute-force pairwise count.
    fn oracle_count(c: &[Point3], r: &[Point3], delta: f64) -> usize {
        c.iter().filter(|p| r.iter().any(|q| p.distance(*q) <= delta)).count()
    }

    #[test]
    fn identical_clouds_fully_overlap() {
        let a = cloud(&[(0.0, 0.0, 0.0), (0.1, 0.0, 0.0), (0.2, 0.3, 0.1)]);
        assert_eq!(overlap_scores(&a, &a, 0.05).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn distant_clouds_do_not_overlap() {
        let a = cloud(&[(0.0, 0.0, 0.0), (0.1, 0.0, 0.0)]);
        let b = cloud(&[(1.0, 0.0, 0.0), (1.1, 0.0, 0.0)]);
        assert_eq!(overlap_scores(&a, &b, 0.05).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn four_vs_six_points() {
        // Three candidate points sit 0.01 m from reference points; one is 1 m away.
        let cand = cloud(&[(0.0, 0.0, 0.0), (0.2, 0.0, 0.0), (0.4, 0.0, 0.0), (3.0, 0.0, 0.0)]);
        let refr = cloud(&[
            (0.01, 0.0, 0.0),
            (0.21, 0.0, 0.0),
            (0.41, 0.0, 0.0),
            (0.0, 1.0, 0.0),
            (0.0, 2.0, 0.0),
            (0.0, 3.0, 0.0),
        ]);
        assert_eq!(oracle_count(&cand.pcd, &refr.pcd, 0.05), 3);
        assert_eq!(overlap_scores(&cand, &refr, 0.05).unwrap(), (0.75, 0.5));
    }

    #[test]
    fn empty_cloud_is_an_error() {
        let a = cloud(&[(0.0, 0.0, 0.0)]);
        let e = cloud(&[]);
        assert_eq!(overlap_scores(&e, &a, 0.05), Err(OverlapError::EmptyCloud));
        assert_eq!(overlap_scores(&a, &e, 0.05), Err(OverlapError::EmptyCloud));
    }

    #[test]
    fn residual_cases() {
        let cand = cloud(&[(0.0, 0.0, 0.0), (0.5, 0.0, 0.0), (1.0, 0.0, 0.0), (1.5, 0.0, 0.0)]);
        assert_eq!(residual_cloud(&cand, &[], 0.05), cand);
        assert!(residual_cloud(&cand, std::slice::from_ref(&cand), 0.05).pcd.is_empty());
        let half = cloud(&[(0.0, 0.0, 0.02), (0.5, 0.0, 0.02)]);
        let res = residual_cloud(&cand, &[half], 0.05);
        assert_eq!(res.pcd, vec![Point3::new(1.0, 0.0, 0.0), Point3::new(1.5, 0.0, 0.0)]);
    }

    proptest! {
        #[test]
        fn index_matches_brute_force(
            c in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -0.2f64..0.2), 1..60),
            r in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -0.2f64..0.2), 1..60),
            delta in 0.01f64..0.4,
        ) {
            let c = cloud(&c);
            let r = cloud(&r);
            let ix = CloudIndex::new(&r.pcd, delta);
            prop_assert_eq!(overlap_count(&c.pcd, &ix), oracle_count(&c.pcd, &r.pcd, delta));
        }
    }
}
