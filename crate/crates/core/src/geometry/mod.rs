//! Projective geometry of quadrics and conics, SE(3) poses, pinhole
//! cameras, ellipse fitting and the Gaussian Wasserstein-2 distance.
//!
//! All types are immutable after construction and all operations are
//! pure functions, so everything here is safe to use concurrently.

mod ellipse;
mod ellipsoid;
mod pose;
mod wasserstein;

pub use ellipse::{fit_ellipse_to_points, inscribed_ellipse, wrap_half_pi as wrap_angle_half_pi, Ellipse};
pub use ellipsoid::{ellipsoid_from_pose_size, project_ellipsoid, Ellipsoid};
pub use pose::{CameraIntrinsics, Pose};
pub use wasserstein::{sqrt_psd, wasserstein2_sq};

use thiserror::Error;

/// Errors produced by the geometry primitives.
#[derive(Debug, Clone, Error)]
pub enum GeometryError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Projection of an ellipsoid does not yield a real ellipse
    /// (behind the camera or intersecting the principal plane).
    #[error("degenerate projection: {0}")]
    ProjectionDegenerate(String),
    /// Ellipse fit impossible (too few points or rank-deficient scatter).
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),
}
