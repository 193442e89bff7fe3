//! Perspective-three-point absolute pose: Grunert's distance-ratio
//! quartic followed by root polishing and a three-point alignment.

use nalgebra::{Matrix3, Matrix4, Vector2, Vector3};

use crate::geometry::{CameraIntrinsics, Pose};

use super::RelocError;

/// All real solutions of the P3P problem for three world points and
/// their pixel observations. Every returned pose reprojects the three
/// points within 1e-6 px; candidate roots that fail this bound are
/// discarded.
pub fn p3p_pose(
    world: &[Vector3<f64>; 3],
    image: &[Vector2<f64>; 3],
    k: &CameraIntrinsics,
) -> Result<Vec<Pose>, RelocError> {
    // Degeneracy checks.
    let cross = (world[1] - world[0]).cross(&(world[2] - world[0]));
    let scale = (world[1] - world[0]).norm().max((world[2] - world[0]).norm());
    if cross.norm() < 1e-9 * scale * scale {
        return Err(RelocError::NoSolution("collinear world points".into()));
    }
    for i in 0..3 {
        for j in (i + 1)..3 {
            if (image[i] - image[j]).norm() < 1e-9 {
                return Err(RelocError::NoSolution("coincident image points".into()));
            }
        }
    }

    let f: Vec<Vector3<f64>> = image.iter().map(|px| k.ray_direction(px).normalize()).collect();
    let a = (world[1] - world[2]).norm();
    let b = (world[0] - world[2]).norm();
    let c = (world[0] - world[1]).norm();
    let cos_alpha = f[1].dot(&f[2]);
    let cos_beta = f[0].dot(&f[2]);
    let cos_gamma = f[0].dot(&f[1]);

    // With u = s2/s1, v = s3/s1 the cosine-law system reduces to
    //   u^2 - 2 cos(alpha) v u + v^2 - A(v) = 0
    //   u^2 - 2 cos(gamma) u + 1 - C(v) = 0
    // where A and C are quadratics in v. Eliminating u yields a
    // quartic in v.
    let ab2 = (a / b) * (a / b);
    let cb2 = (c / b) * (c / b);
    let qa = [ab2, -2.0 * ab2 * cos_beta, ab2]; // A(v)
    let qc = [cb2, -2.0 * cb2 * cos_beta, cb2]; // C(v)
    // N(v) = 1 + A(v) - v^2 - C(v)
    let n = [
        1.0 + qa[0] - qc[0],
        qa[1] - qc[1],
        qa[2] - 1.0 - qc[2],
    ];
    // D(v) = 2 cos(gamma) - 2 cos(alpha) v
    let d = [2.0 * cos_gamma, -2.0 * cos_alpha];
    // Quartic: N^2 - 2 cos(gamma) N D + (1 - C) D^2 = 0
    let n2 = poly_mul(&n, &n);
    let nd = poly_mul(&n, &d);
    let one_minus_c = [1.0 - qc[0], -qc[1], -qc[2]];
    let d2 = poly_mul(&d, &d);
    let cd2 = poly_mul(&one_minus_c, &d2);
    let mut quartic = [0.0f64; 5];
    for i in 0..5 {
        quartic[i] = n2.get(i).copied().unwrap_or(0.0) - 2.0 * cos_gamma * nd.get(i).copied().unwrap_or(0.0)
            + cd2.get(i).copied().unwrap_or(0.0);
    }

    let mut poses = Vec::new();
    for v in real_positive_roots(&quartic) {
        let dv = d[0] + d[1] * v;
        if dv.abs() < 1e-12 {
            continue;
        }
        let u = (n[0] + n[1] * v + n[2] * v * v) / dv;
        if u <= 0.0 {
            continue;
        }
        let denom = 1.0 + v * v - 2.0 * v * cos_beta;
        if denom <= 0.0 {
            continue;
        }
        let s1 = b / denom.sqrt();
        let mut s = [s1, u * s1, v * s1];
        polish_distances(&mut s, a, b, c, cos_alpha, cos_beta, cos_gamma);
        if s.iter().any(|&si| !(si > 0.0) || !si.is_finite()) {
            continue;
        }
        let cam_pts = [f[0] * s[0], f[1] * s[1], f[2] * s[2]];
        let Some(pose) = align_three_points(world, &cam_pts) else {
            continue;
        };
        // Exactness gate: keep only poses that reproject all three
        // correspondences within 1e-6 px.
        let ok = world.iter().zip(image.iter()).all(|(w, px)| {
            k.project(&pose.transform_point(w))
                .map_or(false, |p| (p - px).norm() < 1e-6)
        });
        if ok && !poses.iter().any(|p: &Pose| pose_close(p, &pose)) {
            poses.push(pose);
        }
    }
    if poses.is_empty() {
        return Err(RelocError::NoSolution("no valid P3P solution".into()));
    }
    Ok(poses)
}

fn pose_close(a: &Pose, b: &Pose) -> bool {
    a.rotation_angle_to(b) < 1e-7 && (a.translation() - b.translation()).norm() < 1e-7
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &pi) in p.iter().enumerate() {
        for (j, &qj) in q.iter().enumerate() {
            out[i + j] += pi * qj;
        }
    }
    out
}

/// Real positive roots of a polynomial with ascending coefficients,
/// via the companion matrix, then Newton-polished.
fn real_positive_roots(coeffs: &[f64; 5]) -> Vec<f64> {
    let mut c: Vec<f64> = coeffs.to_vec();
    let max_mag = c.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if max_mag == 0.0 {
        return Vec::new();
    }
    while c.len() > 1 && c.last().unwrap().abs() < 1e-12 * max_mag {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg < 1 {
        return Vec::new();
    }
    let lead = c[deg];
    let mut roots = Vec::new();
    match deg {
        1 => roots.push(-c[0] / c[1]),
        2 => {
            let disc = c[1] * c[1] - 4.0 * c[2] * c[0];
            if disc >= 0.0 {
                let sq = disc.sqrt();
                roots.push((-c[1] + sq) / (2.0 * c[2]));
                roots.push((-c[1] - sq) / (2.0 * c[2]));
            }
        }
        _ => {
            // Companion matrix (pad to 4x4 when the degree is 3 by
            // using a zero eigenvalue filtered below).
            let mut comp = Matrix4::zeros();
            for i in 0..deg {
                comp[(i, deg - 1)] = -c[i] / lead;
            }
            for i in 1..deg {
                comp[(i, i - 1)] = 1.0;
            }
            let eig = comp.complex_eigenvalues();
            for e in eig.iter() {
                if e.im.abs() < 1e-6 * (1.0 + e.re.abs()) {
                    roots.push(e.re);
                }
            }
            if deg == 3 {
                // remove the artificial zero eigenvalue of the padding
                roots.retain(|r| r.abs() > 1e-12 || poly_eval(&c, 0.0).abs() < 1e-12 * max_mag);
            }
        }
    }
    let mut out = Vec::new();
    for mut r in roots {
        for _ in 0..8 {
            let p = poly_eval(&c, r);
            let dp = poly_eval_deriv(&c, r);
            if dp.abs() < 1e-300 {
                break;
            }
            let step = p / dp;
            r -= step;
            if step.abs() < 1e-15 * (1.0 + r.abs()) {
                break;
            }
        }
        if r > 0.0 && r.is_finite() && !out.iter().any(|&x: &f64| (x - r).abs() < 1e-9 * (1.0 + r)) {
            out.push(r);
        }
    }
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    out
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

fn poly_eval_deriv(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, &ci)| acc * x + i as f64 * ci)
}

/// Newton refinement of the three camera-point distances on the
/// cosine-law system.
fn polish_distances(
    s: &mut [f64; 3],
    a: f64,
    b: f64,
    c: f64,
    cos_alpha: f64,
    cos_beta: f64,
    cos_gamma: f64,
) {
    for _ in 0..10 {
        let g = Vector3::new(
            s[1] * s[1] + s[2] * s[2] - 2.0 * s[1] * s[2] * cos_alpha - a * a,
            s[0] * s[0] + s[2] * s[2] - 2.0 * s[0] * s[2] * cos_beta - b * b,
            s[0] * s[0] + s[1] * s[1] - 2.0 * s[0] * s[1] * cos_gamma - c * c,
        );
        if g.norm() < 1e-14 * (a * a + b * b + c * c) {
            break;
        }
        let jac = Matrix3::new(
            0.0,
            2.0 * s[1] - 2.0 * s[2] * cos_alpha,
            2.0 * s[2] - 2.0 * s[1] * cos_alpha,
            2.0 * s[0] - 2.0 * s[2] * cos_beta,
            0.0,
            2.0 * s[2] - 2.0 * s[0] * cos_beta,
            2.0 * s[0] - 2.0 * s[1] * cos_gamma,
            2.0 * s[1] - 2.0 * s[0] * cos_gamma,
            0.0,
        );
        let Some(inv) = jac.try_inverse() else { break };
        let delta = inv * g;
        s[0] -= delta[0];
        s[1] -= delta[1];
        s[2] -= delta[2];
    }
}

/// Rigid alignment of three world points onto three camera points
/// (Kabsch with SVD); returns the world-to-camera pose.
fn align_three_points(world: &[Vector3<f64>; 3], cam: &[Vector3<f64>; 3]) -> Option<Pose> {
    let wc = (world[0] + world[1] + world[2]) / 3.0;
    let cc = (cam[0] + cam[1] + cam[2]) / 3.0;
    let mut h = Matrix3::zeros();
    for i in 0..3 {
        h += (world[i] - wc) * (cam[i] - cc).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let mut r = v_t.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -1.0;
        r = v_t.transpose() * d * u.transpose();
    }
    let t = cc - r * wc;
    Pose::new(r, t).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn reprojection_errors(pose: &Pose, world: &[Vector3<f64>; 3], image: &[Vector2<f64>; 3]) -> f64 {
        let k = k();
        world
            .iter()
            .zip(image.iter())
            .map(|(w, px)| {
                (k.project(&pose.transform_point(w)).expect("in front") - px).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn recovers_generating_pose() {
        let k = k();
        let gt = Pose::look_at(
            Vector3::new(1.5, -2.0, 1.0),
            Vector3::new(0.2, 0.1, 0.3),
            Vector3::new(0.0, 0.0, 1.0),
        )
        .unwrap();
        let world = [
            Vector3::new(0.4, 0.0, 0.2),
            Vector3::new(-0.3, 0.5, 0.0),
            Vector3::new(0.1, -0.4, 0.6),
        ];
        let image = [
            k.project(&gt.transform_point(&world[0])).unwrap(),
            k.project(&gt.transform_point(&world[1])).unwrap(),
            k.project(&gt.transform_point(&world[2])).unwrap(),
        ];
        let poses = p3p_pose(&world, &image, &k).unwrap();
        let best = poses
            .iter()
            .min_by(|p, q| {
                gt.rotation_angle_to(p)
                    .partial_cmp(&gt.rotation_angle_to(q))
                    .unwrap()
            })
            .unwrap();
        assert!(gt.rotation_angle_to(best) < 1e-6, "rot err {}", gt.rotation_angle_to(best));
        assert!((best.translation() - gt.translation()).norm() < 1e-6);
        for p in &poses {
            assert!(reprojection_errors(p, &world, &image) < 1e-6);
        }
    }

    #[test]
    fn frontal_equilateral_triangle() {
        let k = k();
        let r = 1.0;
        let world = [
            Vector3::new(r, 0.0, 5.0),
            Vector3::new(-0.5 * r, 0.75f64.sqrt() * r, 5.0),
            Vector3::new(-0.5 * r, -(0.75f64.sqrt()) * r, 5.0),
        ];
        let gt = Pose::identity();
        let image = [
            k.project(&world[0]).unwrap(),
            k.project(&world[1]).unwrap(),
            k.project(&world[2]).unwrap(),
        ];
        let poses = p3p_pose(&world, &image, &k).unwrap();
        assert!(!poses.is_empty());
        for p in &poses {
            assert!(reprojection_errors(p, &world, &image) < 1e-6);
        }
        assert!(poses.iter().any(|p| gt.rotation_angle_to(p) < 1e-6
            && (p.translation() - gt.translation()).norm() < 1e-6));
    }

    #[test]
    fn collinear_points_fail() {
        let k = k();
        let world = [
            Vector3::new(0.0, 0.0, 5.0),
            Vector3::new(0.5, 0.0, 5.0),
            Vector3::new(1.0, 0.0, 5.0),
        ];
        let image = [
            Vector2::new(320.0, 240.0),
            Vector2::new(370.0, 240.0),
            Vector2::new(420.0, 240.0),
        ];
        assert!(matches!(
            p3p_pose(&world, &image, &k),
            Err(RelocError::NoSolution(_))
        ));
    }

    #[test]
    fn random_poses_reproject_exactly() {
        use rand::{Rng, SeedableRng};
        let k = k();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut recovered = 0;
        for _ in 0..300 {
            let gt = Pose::from_parts(
                Rotation3::from_euler_angles(
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(-3.0..3.0),
                ),
                Vector3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(2.0..6.0)),
            );
            let world: Vec<Vector3<f64>> = (0..3)
                .map(|_| {
                    Vector3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    )
                })
                .collect();
            let world = [world[0], world[1], world[2]];
            let mut image = [Vector2::zeros(); 3];
            let mut ok = true;
            for i in 0..3 {
                match k.project(&gt.transform_point(&world[i])) {
                    Some(px) if k.contains(&px) => image[i] = px,
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let Ok(poses) = p3p_pose(&world, &image, &k) else {
                continue;
            };
            for p in &poses {
                assert!(reprojection_errors(p, &world, &image) < 1e-6);
            }
            if poses.iter().any(|p| gt.rotation_angle_to(p) < 1e-5) {
                recovered += 1;
            }
        }
        // The ground truth must be in the solution set essentially always.
        assert!(recovered > 250, "recovered {recovered}");
    }
}
