use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::{CameraIntrinsics, Ellipse, GeometryError, Pose};

/// 9-DOF ellipsoidal landmark: center, rotation and three semi-axes,
/// tagged with a semantic class.
///
/// The dual quadric form `Q*` is symmetric with eigenvalue signature
/// (3 positive, 1 negative); that signature is preserved under the
/// rigid congruence used in [`Ellipsoid::dual_form`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: Vector3<f64>,
    pub rotation: Rotation3<f64>,
    pub semi_axes: Vector3<f64>,
    pub class_id: i32,
}

impl Ellipsoid {
    pub fn new(
        center: Vector3<f64>,
        rotation: Rotation3<f64>,
        semi_axes: Vector3<f64>,
        class_id: i32,
    ) -> Result<Self, GeometryError> {
        if !(semi_axes.x > 0.0 && semi_axes.y > 0.0 && semi_axes.z > 0.0) {
            return Err(GeometryError::InvalidArgument(
                "ellipsoid semi-axes must be positive".into(),
            ));
        }
        Ok(Self {
            center,
            rotation,
            semi_axes,
            class_id,
        })
    }

    /// Dual quadric `Q*`: the congruence of the origin-centered form
    /// `diag(a^2, b^2, c^2, -1)` by the world-from-object transform,
    /// normalized so `Q*[3][3] = -1`.
    pub fn dual_form(&self) -> Matrix4<f64> {
        let d = Matrix4::from_diagonal(&nalgebra::Vector4::new(
            self.semi_axes.x * self.semi_axes.x,
            self.semi_axes.y * self.semi_axes.y,
            self.semi_axes.z * self.semi_axes.z,
            -1.0,
        ));
        let mut t = Matrix4::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        t.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.center);
        t * d * t.transpose()
    }

    /// Recover (center, rotation, semi-axes) from a dual quadric.
    /// Axes come back sorted descending; rotation columns are the
    /// corresponding principal directions (determinant forced to +1).
    pub fn from_dual_form(q: &Matrix4<f64>, class_id: i32) -> Result<Self, GeometryError> {
        if q[(3, 3)] >= -1e-15 {
            return Err(GeometryError::InvalidArgument(
                "dual quadric has non-negative (3,3) entry".into(),
            ));
        }
        let q = q / -q[(3, 3)];
        let center = Vector3::new(-q[(0, 3)], -q[(1, 3)], -q[(2, 3)]);
        let a33: Matrix3<f64> = q.fixed_view::<3, 3>(0, 0) + center * center.transpose();
        let sym = nalgebra::SymmetricEigen::new(0.5 * (a33 + a33.transpose()));
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| sym.eigenvalues[j].partial_cmp(&sym.eigenvalues[i]).unwrap());
        let mut axes = Vector3::zeros();
        let mut rot = Matrix3::zeros();
        for (k, &i) in order.iter().enumerate() {
            let lambda = sym.eigenvalues[i];
            if lambda <= 0.0 {
                return Err(GeometryError::InvalidArgument(
                    "dual quadric does not have signature (3,1)".into(),
                ));
            }
            axes[k] = lambda.sqrt();
            rot.set_column(k, &sym.eigenvectors.column(i).into_owned());
        }
        if rot.determinant() < 0.0 {
            let flipped = -rot.column(2).into_owned();
            rot.set_column(2, &flipped);
        }
        Ellipsoid::new(center, Rotation3::from_matrix_unchecked(rot), axes, class_id)
    }
}

/// Build an ellipsoid from a ground-plane pose and a full-extent size
/// `(l, w, h)`: semi-axes are the half extents, rotation is a yaw about
/// the world z axis.
pub fn ellipsoid_from_pose_size(
    center: Vector3<f64>,
    yaw: f64,
    size: (f64, f64, f64),
) -> Result<Ellipsoid, GeometryError> {
    let (l, w, h) = size;
    if !(l > 0.0 && w > 0.0 && h > 0.0) {
        return Err(GeometryError::InvalidArgument(
            "size extents must be positive".into(),
        ));
    }
    Ellipsoid::new(
        center,
        Rotation3::from_axis_angle(&Vector3::z_axis(), yaw),
        Vector3::new(0.5 * l, 0.5 * w, 0.5 * h),
        0,
    )
}

/// Project an ellipsoid through a camera: `C* = P Q* P^T`, decomposed
/// into a geometric ellipse after normalization.
pub fn project_ellipsoid(
    q: &Ellipsoid,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> Result<Ellipse, GeometryError> {
    let depth = pose.transform_point(&q.center).z;
    if depth <= 0.0 {
        return Err(GeometryError::ProjectionDegenerate(format!(
            "ellipsoid center at non-positive depth {depth:.3}"
        )));
    }
    let p = pose.projection_matrix(k);
    let c = p * q.dual_form() * p.transpose();
    Ellipse::from_dual_conic(&c)
}
