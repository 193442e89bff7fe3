use nalgebra::{Matrix3, Matrix3x4, Rotation3, Unit, UnitQuaternion, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::GeometryError;

const ORTHONORMALITY_TOL: f64 = 1e-9;

/// Rigid transform mapping world coordinates into camera coordinates.
///
/// The camera frame follows the usual computer-vision convention:
/// x right, y down, z forward (optical axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    rotation: Rotation3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Build from a raw rotation matrix, checking orthonormality and
    /// positive determinant to 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let rtr = rotation.transpose() * rotation;
        let err = (rtr - Matrix3::identity()).abs().max();
        if err > ORTHONORMALITY_TOL {
            return Err(GeometryError::InvalidArgument(format!(
                "rotation is not orthonormal (|R^T R - I| = {err:.3e})"
            )));
        }
        if (rotation.determinant() - 1.0).abs() > ORTHONORMALITY_TOL {
            return Err(GeometryError::InvalidArgument(
                "rotation determinant is not +1".into(),
            ));
        }
        Ok(Self {
            rotation: Rotation3::from_matrix_unchecked(rotation),
            translation,
        })
    }

    pub fn from_parts(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Camera pose looking from `eye` towards `target`, with `up`
    /// fixing the roll. Returns a world-to-camera transform.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(GeometryError::InvalidArgument(
                "look_at: eye and target coincide".into(),
            ));
        }
        let z = Unit::new_normalize(forward);
        let x = up.cross(&z);
        if x.norm() < 1e-12 {
            return Err(GeometryError::InvalidArgument(
                "look_at: up is parallel to the viewing direction".into(),
            ));
        }
        let x = Unit::new_normalize(x);
        let y = z.cross(&x);
        // Rows of R are the camera axes expressed in world coordinates.
        let rot = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let rotation = Rotation3::from_matrix_unchecked(rot);
        Ok(Self {
            translation: -(rotation * eye),
            rotation,
        })
    }

    pub fn rotation(&self) -> &Rotation3<f64> {
        &self.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        *self.rotation.matrix()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    /// World-space position of the camera center, `-R^T t`.
    pub fn camera_center(&self) -> Vector3<f64> {
        -(self.rotation.inverse() * self.translation)
    }

    pub fn transform_point(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * world + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.inverse();
        Self {
            translation: -(rotation * self.translation),
            rotation,
        }
    }

    /// Composition: `self.compose(&other)` applies `other` first.
    pub fn compose(&self, other: &Pose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Left-multiplicative retraction on SE(3): `exp(delta) * self`,
    /// with `delta = (omega, u)` (rotation then translation part).
    pub fn retract(&self, delta: &Vector6<f64>) -> Self {
        let omega = Vector3::new(delta[0], delta[1], delta[2]);
        let u = Vector3::new(delta[3], delta[4], delta[5]);
        let dr = Rotation3::from_scaled_axis(omega);
        Self {
            rotation: dr * self.rotation,
            translation: dr * self.translation + u,
        }
    }

    /// Angle (radians) of the relative rotation between two poses.
    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        let rel = self.rotation * other.rotation.inverse();
        // Clamp before acos: the trace can exceed 3 by roundoff for
        // near-identical rotations, which would yield NaN.
        let c = ((rel.matrix().trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }

    /// 3x4 projection matrix `K [R | t]`.
    pub fn projection_matrix(&self, k: &CameraIntrinsics) -> Matrix3x4<f64> {
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        k.matrix() * rt
    }

    pub fn to_unit_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&self.rotation)
    }
}

/// Pinhole camera intrinsics plus image size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(GeometryError::InvalidArgument(
                "focal lengths must be positive".into(),
            ));
        }
        if cx <= 0.0 || cx >= width as f64 || cy <= 0.0 || cy >= height as f64 {
            return Err(GeometryError::InvalidArgument(
                "principal point must lie inside the image".into(),
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    /// Project a camera-frame point; `None` if it is not strictly in
    /// front of the camera.
    pub fn project(&self, p_cam: &Vector3<f64>) -> Option<Vector2<f64>> {
        if p_cam.z <= 0.0 {
            return None;
        }
        Some(Vector2::new(
            self.fx * p_cam.x / p_cam.z + self.cx,
            self.fy * p_cam.y / p_cam.z + self.cy,
        ))
    }

    /// Back-project a pixel at the given depth into the camera frame.
    pub fn backproject(&self, px: &Vector2<f64>, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (px.x - self.cx) / self.fx * depth,
            (px.y - self.cy) / self.fy * depth,
            depth,
        )
    }

    /// Unit-free ray direction through a pixel (z component = 1).
    pub fn ray_direction(&self, px: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new((px.x - self.cx) / self.fx, (px.y - self.cy) / self.fy, 1.0)
    }

    pub fn contains(&self, px: &Vector2<f64>) -> bool {
        px.x >= 0.0 && px.x < self.width as f64 && px.y >= 0.0 && px.y < self.height as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn rejects_non_orthonormal_rotation() {
        let m = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Pose::new(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn rejects_reflection() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Pose::new(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn group_axioms() {
        let a = Pose::from_parts(
            Rotation3::from_euler_angles(0.3, -0.2, 0.9),
            Vector3::new(1.0, -2.0, 0.5),
        );
        let b = Pose::from_parts(
            Rotation3::from_euler_angles(-1.0, 0.4, 0.1),
            Vector3::new(0.0, 3.0, -1.0),
        );
        let p = Vector3::new(0.3, 0.7, -2.1);
        // (a ∘ b)(p) == a(b(p))
        assert_relative_eq!(
            a.compose(&b).transform_point(&p),
            a.transform_point(&b.transform_point(&p)),
            epsilon = 1e-12
        );
        // a ∘ a⁻¹ == id
        let id = a.compose(&a.inverse());
        assert_relative_eq!(id.transform_point(&p), p, epsilon = 1e-12);
    }

    #[test]
    fn camera_center_inverts_translation() {
        let pose = Pose::look_at(
            Vector3::new(0.0, 0.0, -5.0),
            Vector3::zeros(),
            Vector3::new(0.0, -1.0, 0.0),
        )
        .unwrap();
        assert_relative_eq!(
            pose.camera_center(),
            Vector3::new(0.0, 0.0, -5.0),
            epsilon = 1e-12
        );
        // The origin sits 5 m in front of the camera.
        let p = pose.transform_point(&Vector3::zeros());
        assert_relative_eq!(p, Vector3::new(0.0, 0.0, 5.0), epsilon = 1e-12);
    }

    #[test]
    fn projection_at_principal_point() {
        let k = k();
        let px = k.project(&Vector3::new(0.0, 0.0, 4.0)).unwrap();
        assert_relative_eq!(px, Vector2::new(320.0, 240.0), epsilon = 1e-12);
        assert!(k.project(&Vector3::new(0.0, 0.0, -1.0)).is_none());
    }

    #[test]
    fn backproject_roundtrip() {
        let k = k();
        let px = Vector2::new(123.4, 400.2);
        let p = k.backproject(&px, 2.5);
        assert_relative_eq!(k.project(&p).unwrap(), px, epsilon = 1e-12);
    }

    #[test]
    fn retract_zero_is_identity() {
        let a = Pose::from_parts(
            Rotation3::from_euler_angles(0.3, -0.2, 0.9),
            Vector3::new(1.0, -2.0, 0.5),
        );
        let b = a.retract(&Vector6::zeros());
        assert_relative_eq!(a.rotation_matrix(), b.rotation_matrix(), epsilon = 1e-15);
        assert_relative_eq!(a.translation(), b.translation(), epsilon = 1e-15);
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(-1.0, 500.0, 320.0, 240.0, 640, 480).is_err());
        assert!(CameraIntrinsics::new(500.0, 500.0, 700.0, 240.0, 640, 480).is_err());
    }
}
