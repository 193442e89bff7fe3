//! 2D detection-to-object association and 3D duplicate-object
//! matching.
//!
//! The 2D tracker projects each object's voxels into the current frame,
//! builds a semantic + IoU cost matrix against the frame's detections
//! and solves it with the Hungarian algorithm. The 3D matcher decides
//! whether a freshly modeled object duplicates an existing map object
//! by mutual nearest-voxel counting.

pub mod hungarian;

use std::collections::HashMap;

use nalgebra::Vector3;
use thiserror::Error;

use crate::frame::{BBox, Detection2D};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::voxel::ObjectInstanceModel;

pub use hungarian::FORBIDDEN_COST;

#[derive(Debug, Clone, Error)]
pub enum TrackingError {
    #[error("object has no voxel in front of the camera")]
    NotVisible,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Outcome of one frame of 2D association. Indices refer to the row
/// (object) and column (detection) order of the cost matrix; each index
/// appears at most once across all three fields.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssociationResult {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_objects: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Axis-aligned bounding box of the projected voxel centers, clamped to
/// the image.
pub fn project_object_bbox(
    model: &ObjectInstanceModel,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> Result<BBox, TrackingError> {
    let mut pts = Vec::new();
    for center in model.voxel_centers() {
        let cam = pose.transform_point(&center);
        if let Some(px) = k.project(&cam) {
            pts.push(px);
        }
    }
    BBox::from_points(&pts)
        .map(|b| b.clamp_to(k.width, k.height))
        .ok_or(TrackingError::NotVisible)
}

/// Association cost of Eq.-style semantic + reprojection terms:
/// `lambda1 * mismatch(class) + lambda2 * (1 - IoU)`. An object that is
/// not visible gets the forbidden sentinel and is never selected.
pub fn association_cost(
    object: &ObjectInstanceModel,
    det: &Detection2D,
    pose: &Pose,
    k: &CameraIntrinsics,
    lambda1: f64,
    lambda2: f64,
) -> f64 {
    let projected = match project_object_bbox(object, pose, k) {
        Ok(b) => b,
        Err(_) => return f64::INFINITY,
    };
    let mismatch = if object.class_id == det.class_id { 0.0 } else { 1.0 };
    lambda1 * mismatch + lambda2 * (1.0 - projected.iou(&det.bbox))
}

/// Minimum-total-cost one-to-one assignment with gating: matched pairs
/// whose cost reaches `gate` are reported unmatched instead.
pub fn hungarian_assign(cost: &[Vec<f64>], gate: f64) -> AssociationResult {
    let rows = cost.len();
    let cols = cost.first().map_or(0, |r| r.len());
    let assign = hungarian::solve(cost);
    let mut result = AssociationResult::default();
    let mut det_matched = vec![false; cols];
    for (i, a) in assign.iter().enumerate() {
        match a {
            Some(j) if cost[i][*j] < gate => {
                result.pairs.push((i, *j));
                det_matched[*j] = true;
            }
            _ => result.unmatched_objects.push(i),
        }
    }
    result.unmatched_detections = (0..cols).filter(|&j| !det_matched[j]).collect();
    let _ = rows;
    result
}

/// Count voxels of `a` that have at least one voxel of `b` within
/// `radius` (Euclidean distance between voxel centers). Uses a uniform
/// grid hash over `b`.
pub fn nearest_voxel_count(a: &ObjectInstanceModel, b: &ObjectInstanceModel, radius: f64) -> usize {
    if radius <= 0.0 {
        return 0;
    }
    let mut grid: HashMap<(i64, i64, i64), Vec<Vector3<f64>>> = HashMap::new();
    let cell = |p: &Vector3<f64>| {
        (
            (p.x / radius).floor() as i64,
            (p.y / radius).floor() as i64,
            (p.z / radius).floor() as i64,
        )
    };
    for center in b.voxel_centers() {
        grid.entry(cell(&center)).or_default().push(center);
    }
    let r2 = radius * radius;
    let mut count = 0;
    for center in a.voxel_centers() {
        let (cx, cy, cz) = cell(&center);
        'voxel: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(pts) = grid.get(&(cx + dx, cy + dy, cz + dz)) {
                        if pts.iter().any(|p| (p - center).norm_squared() <= r2) {
                            count += 1;
                            break 'voxel;
                        }
                    }
                }
            }
        }
    }
    count
}

/// 3D duplicate-object test: two same-class voxel models match when
/// their mutual nearest-voxel counts both exceed `xi * min(|v|, |vi|)`.
pub fn match_3d(v: &ObjectInstanceModel, vi: &ObjectInstanceModel, radius: f64, xi: f64) -> bool {
    if v.class_id != vi.class_id {
        return false;
    }
    let min_nodes = v.voxels.len().min(vi.voxels.len()) as f64;
    if min_nodes == 0.0 {
        return false;
    }
    let n_fwd = nearest_voxel_count(v, vi, radius) as f64;
    let n_bwd = nearest_voxel_count(vi, v, radius) as f64;
    n_fwd > xi * min_nodes && n_bwd > xi * min_nodes
}
