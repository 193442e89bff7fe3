use nalgebra::{Matrix2, Matrix3, Rotation2, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use super::GeometryError;
use crate::frame::BBox;

/// 2D ellipse observation, canonically parameterized: `semi_axes.x` is
/// the semi-major axis, `angle` the orientation of that axis wrapped to
/// `[-pi/2, pi/2)`. Circles are stored with angle 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    center: Vector2<f64>,
    semi_axes: Vector2<f64>,
    angle: f64,
}

/// Wrap an orientation into `[-pi/2, pi/2)`; ellipses are symmetric
/// under rotation by pi.
pub fn wrap_half_pi(angle: f64) -> f64 {
    let mut a = angle % PI;
    if a < -FRAC_PI_2 {
        a += PI;
    } else if a >= FRAC_PI_2 {
        a -= PI;
    }
    a
}

impl Ellipse {
    /// Construct from center, semi-axes and orientation. The parameters
    /// are canonicalized (major axis first, angle wrapped).
    pub fn new(
        center: Vector2<f64>,
        semi_axes: Vector2<f64>,
        angle: f64,
    ) -> Result<Self, GeometryError> {
        if !(semi_axes.x > 0.0 && semi_axes.y > 0.0)
            || !semi_axes.x.is_finite()
            || !semi_axes.y.is_finite()
        {
            return Err(GeometryError::InvalidArgument(
                "ellipse semi-axes must be positive and finite".into(),
            ));
        }
        let (mut a, mut b, mut angle) = (semi_axes.x, semi_axes.y, angle);
        if b > a {
            std::mem::swap(&mut a, &mut b);
            angle += FRAC_PI_2;
        }
        let angle = if (a - b).abs() <= 1e-12 * a {
            0.0
        } else {
            wrap_half_pi(angle)
        };
        Ok(Self {
            center,
            semi_axes: Vector2::new(a, b),
            angle,
        })
    }

    pub fn center(&self) -> Vector2<f64> {
        self.center
    }

    /// `(a, b)` with `a >= b`.
    pub fn semi_axes(&self) -> Vector2<f64> {
        self.semi_axes
    }

    /// Orientation of the major axis, in `[-pi/2, pi/2)`.
    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn area(&self) -> f64 {
        PI * self.semi_axes.x * self.semi_axes.y
    }

    /// Gaussian view: covariance of the distribution whose 1-sigma
    /// level set is this ellipse, `R(angle) diag(a^2, b^2) R(angle)^T`.
    pub fn covariance(&self) -> Matrix2<f64> {
        let r = Rotation2::new(self.angle);
        let d = Matrix2::from_diagonal(&Vector2::new(
            self.semi_axes.x * self.semi_axes.x,
            self.semi_axes.y * self.semi_axes.y,
        ));
        r.matrix() * d * r.matrix().transpose()
    }

    /// Recover an ellipse from a Gaussian (mean, covariance).
    pub fn from_gaussian(
        mean: Vector2<f64>,
        cov: Matrix2<f64>,
    ) -> Result<Self, GeometryError> {
        let (axes, angle) = axes_angle_from_spd(&cov)?;
        Ellipse::new(mean, Vector2::new(axes.0.sqrt(), axes.1.sqrt()), angle)
    }

    /// Dual conic `C*`, normalized so that `C*[2][2] = -1`.
    pub fn dual_conic(&self) -> Matrix3<f64> {
        let sigma = self.covariance();
        let m = self.center;
        let mut c = Matrix3::zeros();
        c.fixed_view_mut::<2, 2>(0, 0)
            .copy_from(&(sigma - m * m.transpose()));
        c[(0, 2)] = -m.x;
        c[(1, 2)] = -m.y;
        c[(2, 0)] = -m.x;
        c[(2, 1)] = -m.y;
        c[(2, 2)] = -1.0;
        c
    }

    /// Decompose a dual conic back into geometric parameters.
    ///
    /// The conic is first normalized by dividing by `-C*[2][2]`, which
    /// fixes the projective scale deterministically.
    pub fn from_dual_conic(c: &Matrix3<f64>) -> Result<Self, GeometryError> {
        if c[(2, 2)] >= -1e-15 {
            return Err(GeometryError::ProjectionDegenerate(
                "dual conic has non-negative (2,2) entry".into(),
            ));
        }
        let c = c / -c[(2, 2)];
        let m = Vector2::new(-c[(0, 2)], -c[(1, 2)]);
        let sigma = c.fixed_view::<2, 2>(0, 0) + m * m.transpose();
        let sigma = Matrix2::new(sigma[(0, 0)], sigma[(0, 1)], sigma[(1, 0)], sigma[(1, 1)]);
        Ellipse::from_gaussian(m, sigma)
    }
}

/// Eigen-decompose a symmetric 2x2 matrix into `((l_max, l_min), angle)`
/// with `angle` the orientation of the dominant eigenvector.
/// Errors if the matrix is not positive definite.
pub(crate) fn axes_angle_from_spd(
    sigma: &Matrix2<f64>,
) -> Result<((f64, f64), f64), GeometryError> {
    let (sxx, sxy, syy) = (sigma[(0, 0)], 0.5 * (sigma[(0, 1)] + sigma[(1, 0)]), sigma[(1, 1)]);
    let tr = sxx + syy;
    let det_gap = ((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy).sqrt();
    let l_max = 0.5 * (tr + det_gap);
    let l_min = 0.5 * (tr - det_gap);
    if !(l_min > 0.0) || !l_max.is_finite() {
        return Err(GeometryError::ProjectionDegenerate(
            "2x2 form is not positive definite".into(),
        ));
    }
    let angle = if det_gap <= 1e-12 * l_max {
        0.0
    } else {
        0.5 * (2.0 * sxy).atan2(sxx - syy)
    };
    Ok(((l_max, l_min), wrap_half_pi(angle)))
}

/// Second-moment ellipse fit: the returned ellipse is the 2-sigma level
/// set of the point mass distribution, so a fit to a filled elliptical
/// region reproduces the region boundary.
pub fn fit_ellipse_to_points(points: &[Vector2<f64>]) -> Result<Ellipse, GeometryError> {
    if points.len() < 5 {
        return Err(GeometryError::FitDegenerate(format!(
            "need at least 5 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vector2<f64>>() / n;
    let mut cov = Matrix2::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    // 2-sigma scaling: eigenvalues x4, i.e. axes x2.
    let ((l_max, l_min), angle) = axes_angle_from_spd(&(cov * 4.0))
        .map_err(|_| GeometryError::FitDegenerate("rank-deficient point scatter".into()))?;
    Ellipse::new(mean, Vector2::new(l_max.sqrt(), l_min.sqrt()), angle)
}

/// Axis-aligned ellipse inscribed in a bounding box.
pub fn inscribed_ellipse(bbox: &BBox) -> Result<Ellipse, GeometryError> {
    if !(bbox.w > 0.0 && bbox.h > 0.0) {
        return Err(GeometryError::InvalidArgument(
            "bounding box extents must be positive".into(),
        ));
    }
    Ellipse::new(
        Vector2::new(bbox.x + 0.5 * bbox.w, bbox.y + 0.5 * bbox.h),
        Vector2::new(0.5 * bbox.w, 0.5 * bbox.h),
        0.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn canonicalizes_minor_first_input() {
        let e = Ellipse::new(Vector2::zeros(), Vector2::new(1.0, 2.0), 0.0).unwrap();
        assert_relative_eq!(e.semi_axes(), Vector2::new(2.0, 1.0), epsilon = 1e-15);
        assert_relative_eq!(e.angle(), -FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn rejects_nonpositive_axes() {
        assert!(Ellipse::new(Vector2::zeros(), Vector2::new(0.0, 1.0), 0.0).is_err());
        assert!(Ellipse::new(Vector2::zeros(), Vector2::new(1.0, -2.0), 0.0).is_err());
    }

    #[test]
    fn gaussian_view_roundtrip() {
        let e = Ellipse::new(Vector2::new(3.0, -1.0), Vector2::new(4.0, 1.5), 0.4).unwrap();
        let back = Ellipse::from_gaussian(e.center(), e.covariance()).unwrap();
        assert_relative_eq!(back.center(), e.center(), epsilon = 1e-9);
        assert_relative_eq!(back.semi_axes(), e.semi_axes(), epsilon = 1e-9);
        assert_relative_eq!(back.angle(), e.angle(), epsilon = 1e-9);
    }

    #[test]
    fn dual_conic_roundtrip() {
        let e = Ellipse::new(Vector2::new(320.0, 240.0), Vector2::new(90.0, 40.0), -0.8).unwrap();
        let back = Ellipse::from_dual_conic(&e.dual_conic()).unwrap();
        assert_relative_eq!(back.center(), e.center(), epsilon = 1e-9);
        assert_relative_eq!(back.semi_axes(), e.semi_axes(), epsilon = 1e-9);
        assert_relative_eq!(back.angle(), e.angle(), epsilon = 1e-9);
    }

    #[test]
    fn fit_circle_points() {
        // 360 points on the unit circle: isotropy forces equal axes of
        // length sqrt(2) under the 2-sigma scaling (variance 1/2).
        let pts: Vec<_> = (0..360)
            .map(|i| {
                let t = i as f64 * PI / 180.0;
                Vector2::new(t.cos(), t.sin())
            })
            .collect();
        let e = fit_ellipse_to_points(&pts).unwrap();
        assert_relative_eq!(e.center(), Vector2::zeros(), epsilon = 1e-9);
        assert_relative_eq!(e.semi_axes().x, 2f64.sqrt(), epsilon = 1e-9);
        assert_relative_eq!(e.semi_axes().y, 2f64.sqrt(), epsilon = 1e-9);
        assert_relative_eq!(e.angle(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_axis_aligned_rectangle() {
        let mut pts = Vec::new();
        for i in 0..=40 {
            for j in 0..=20 {
                pts.push(Vector2::new(i as f64 * 0.1, j as f64 * 0.1));
            }
        }
        let e = fit_ellipse_to_points(&pts).unwrap();
        assert_relative_eq!(e.center(), Vector2::new(2.0, 1.0), epsilon = 1e-9);
        assert_relative_eq!(e.angle(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn fit_rotated_rectangle_recovers_angle() {
        let theta = 30f64.to_radians();
        let r = Rotation2::new(theta);
        let mut pts = Vec::new();
        for i in 0..=40 {
            for j in 0..=20 {
                let p = Vector2::new(i as f64 * 0.1 - 2.0, j as f64 * 0.1 - 1.0);
                pts.push(r * p);
            }
        }
        // Oracle: the covariance of the rotated grid has its dominant
        // eigenvector along the rotated long edge.
        let e = fit_ellipse_to_points(&pts).unwrap();
        assert!((e.angle() - theta).abs() < 0.5f64.to_radians());
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        let collinear: Vec<_> = (0..10).map(|i| Vector2::new(i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(
            fit_ellipse_to_points(&collinear),
            Err(GeometryError::FitDegenerate(_))
        ));
        assert!(fit_ellipse_to_points(&collinear[..4]).is_err());
    }

    #[test]
    fn inscribed_examples() {
        let e = inscribed_ellipse(&BBox::new(100.0, 50.0, 100.0, 100.0)).unwrap();
        assert_relative_eq!(e.center(), Vector2::new(150.0, 100.0), epsilon = 1e-15);
        assert_relative_eq!(e.semi_axes(), Vector2::new(50.0, 50.0), epsilon = 1e-15);
        assert_relative_eq!(e.angle(), 0.0, epsilon = 1e-15);

        let e = inscribed_ellipse(&BBox::new(0.0, 0.0, 4.0, 2.0)).unwrap();
        assert_relative_eq!(e.center(), Vector2::new(2.0, 1.0), epsilon = 1e-15);
        assert_relative_eq!(e.semi_axes(), Vector2::new(2.0, 1.0), epsilon = 1e-15);

        let e = inscribed_ellipse(&BBox::new(-10.0, -10.0, 20.0, 20.0)).unwrap();
        assert_relative_eq!(e.center(), Vector2::zeros(), epsilon = 1e-15);
        assert_relative_eq!(e.semi_axes(), Vector2::new(10.0, 10.0), epsilon = 1e-15);

        assert!(inscribed_ellipse(&BBox::new(0.0, 0.0, 0.0, 2.0)).is_err());
    }
}
