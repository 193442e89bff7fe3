//! Voxel model to accurate 9-DOF ellipsoid conversion.
//!
//! The world frame is gravity-aligned with z vertical; objects stand on
//! the ground, so the full rotation reduces to a yaw estimated by PCA
//! of the ground-plane projection of the voxel centers. The ellipsoid
//! is inscribed in the yaw-oriented cuboid of the voxel extents.

use nalgebra::{Rotation2, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ellipsoid_from_pose_size, Ellipsoid};
use crate::voxel::ObjectInstanceModel;

#[derive(Debug, Clone, Error)]
pub enum EllipsoidGenError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Yaw-oriented cuboid: `size = (l, w, h)` with `l` along the principal
/// ground-plane axis, `w` perpendicular and `h` vertical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedCuboid {
    pub center: Vector3<f64>,
    pub yaw: f64,
    pub size: (f64, f64, f64),
}

/// PCA yaw estimate; `degenerate` marks an isotropic ground-plane
/// spread where the principal direction is arbitrary (yaw tie-broken
/// to 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawEstimate {
    pub yaw: f64,
    pub degenerate: bool,
}

/// Orientation of the principal eigenvector of the 2x2 covariance of
/// the voxel centers projected to the ground plane, wrapped to
/// `[-pi/2, pi/2)`.
pub fn estimate_yaw_pca(model: &ObjectInstanceModel) -> Result<YawEstimate, EllipsoidGenError> {
    if model.voxels.len() < 3 {
        return Err(EllipsoidGenError::InvalidArgument(format!(
            "need at least 3 voxels for PCA, got {}",
            model.voxels.len()
        )));
    }
    let pts: Vec<Vector2<f64>> = model.voxel_centers().map(|c| c.xy()).collect();
    let n = pts.len() as f64;
    let mean = pts.iter().sum::<Vector2<f64>>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in &pts {
        let d = p - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    sxx /= n;
    sxy /= n;
    syy /= n;
    let gap = ((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy).sqrt();
    if gap < 1e-9 {
        return Ok(YawEstimate {
            yaw: 0.0,
            degenerate: true,
        });
    }
    let yaw = crate::geometry::wrap_angle_half_pi(0.5 * (2.0 * sxy).atan2(sxx - syy));
    Ok(YawEstimate {
        yaw,
        degenerate: false,
    })
}

/// Yaw-aligned cuboid of the voxel centers, padded by one voxel (half a
/// voxel per side) because voxel centers under-represent true extents.
pub fn compute_cuboid(
    model: &ObjectInstanceModel,
    yaw: f64,
) -> Result<OrientedCuboid, EllipsoidGenError> {
    if model.is_empty() {
        return Err(EllipsoidGenError::InvalidArgument("empty voxel model".into()));
    }
    let r_inv = Rotation2::new(-yaw);
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for c in model.voxel_centers() {
        let xy = r_inv * c.xy();
        let aligned = Vector3::new(xy.x, xy.y, c.z);
        lo = lo.inf(&aligned);
        hi = hi.sup(&aligned);
    }
    let mid = 0.5 * (lo + hi);
    let extent = hi - lo;
    let pad = model.resolution;
    let r = Rotation2::new(yaw);
    let center_xy = r * mid.xy();
    Ok(OrientedCuboid {
        center: Vector3::new(center_xy.x, center_xy.y, mid.z),
        yaw,
        size: (extent.x + pad, extent.y + pad, extent.z + pad),
    })
}

/// Ellipsoid inscribed in the cuboid: same center and yaw, semi-axes
/// equal to the half extents.
pub fn build_ellipsoid(cuboid: &OrientedCuboid, class_id: i32) -> Ellipsoid {
    let mut e = ellipsoid_from_pose_size(cuboid.center, cuboid.yaw, cuboid.size)
        .expect("cuboid extents are positive by construction");
    e.class_id = class_id;
    e
}
