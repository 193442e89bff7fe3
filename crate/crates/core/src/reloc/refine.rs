//! Robust Wasserstein pose refinement: damped least squares over the
//! 6-DOF pose with Huber-weighted, area-normalized squared
//! Wasserstein-2 residuals between observation ellipses and projected
//! map ellipsoids.

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

use crate::geometry::{project_ellipsoid, wasserstein2_sq, CameraIntrinsics, Ellipsoid, Pose};

use super::{ObservationEllipse, RelocResult, RelocStatus};

/// Residual value substituted when an object fails to project at a
/// probed pose; constant, so it never attracts the optimizer.
const DEGENERATE_RESIDUAL: f64 = 1e6;

/// Tuning knobs of [`refine_pose`].
#[derive(Debug, Clone, Copy)]
pub struct RefineParams {
    /// Huber threshold on the area-normalized squared distances.
    pub huber_delta: f64,
    pub max_iterations: usize,
    /// Central-difference step for numeric Jacobians.
    pub fd_step: f64,
    pub gradient_tol: f64,
    pub step_tol: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            huber_delta: 2.0,
            max_iterations: 100,
            fd_step: 1e-6,
            gradient_tol: 1e-8,
            step_tol: 1e-10,
        }
    }
}

/// Huber loss applied to an already-squared residual value.
fn huber_sq(e: f64, delta: f64) -> f64 {
    if e <= delta {
        e
    } else {
        2.0 * (delta * e).sqrt() - delta
    }
}

fn raw_residual(
    pose: &Pose,
    obs: &ObservationEllipse,
    obj: &Ellipsoid,
    k: &CameraIntrinsics,
) -> f64 {
    match project_ellipsoid(obj, pose, k) {
        Ok(proj) => wasserstein2_sq(&obs.ellipse, &proj) / obs.area,
        Err(_) => DEGENERATE_RESIDUAL,
    }
}

/// Robust residual vector r with r_i = sqrt(ρ(e_i)), so the total cost
/// is rᵀr.
fn residuals(
    pose: &Pose,
    observations: &[ObservationEllipse],
    map_objects: &[Ellipsoid],
    correspondences: &[(usize, usize)],
    k: &CameraIntrinsics,
    delta: f64,
) -> DVector<f64> {
    DVector::from_iterator(
        correspondences.len(),
        correspondences.iter().map(|&(o, m)| {
            huber_sq(raw_residual(pose, &observations[o], &map_objects[m], k), delta).sqrt()
        }),
    )
}

/// Total robust cost Σ ρ(e_i) at a pose.
pub fn robust_cost(
    pose: &Pose,
    observations: &[ObservationEllipse],
    map_objects: &[Ellipsoid],
    correspondences: &[(usize, usize)],
    k: &CameraIntrinsics,
    delta: f64,
) -> f64 {
    correspondences
        .iter()
        .map(|&(o, m)| huber_sq(raw_residual(pose, &observations[o], &map_objects[m], k), delta))
        .sum()
}

fn jacobian(
    pose: &Pose,
    observations: &[ObservationEllipse],
    map_objects: &[Ellipsoid],
    correspondences: &[(usize, usize)],
    k: &CameraIntrinsics,
    delta: f64,
    h: f64,
) -> DMatrix<f64> {
    let n = correspondences.len();
    let mut jac = DMatrix::zeros(n, 6);
    for col in 0..6 {
        let mut step = Vector6::zeros();
        step[col] = h;
        let plus = residuals(&pose.retract(&step), observations, map_objects, correspondences, k, delta);
        step[col] = -h;
        let minus = residuals(&pose.retract(&step), observations, map_objects, correspondences, k, delta);
        for row in 0..n {
            jac[(row, col)] = (plus[row] - minus[row]) / (2.0 * h);
        }
    }
    jac
}

/// Gradient of the robust cost with respect to the 6-dim pose
/// increment, computed as 2·Jᵀr from the numeric residual Jacobian.
pub fn cost_gradient(
    pose: &Pose,
    observations: &[ObservationEllipse],
    map_objects: &[Ellipsoid],
    correspondences: &[(usize, usize)],
    k: &CameraIntrinsics,
    delta: f64,
    fd_step: f64,
) -> Vector6<f64> {
    let r = residuals(pose, observations, map_objects, correspondences, k, delta);
    let j = jacobian(pose, observations, map_objects, correspondences, k, delta, fd_step);
    let g = 2.0 * j.transpose() * r;
    Vector6::from_iterator(g.iter().copied())
}

/// Minimize the robust Wasserstein objective over the pose with a
/// Levenberg–Marquardt-style damped Gauss–Newton loop and the
/// correspondences fixed to `initial`'s. Accepted steps never increase
/// the cost; ten consecutive rejected damped steps without any prior
/// improvement return the initial result flagged as refinement-failed.
pub fn refine_pose(
    initial: &RelocResult,
    observations: &[ObservationEllipse],
    map_objects: &[Ellipsoid],
    k: &CameraIntrinsics,
    params: &RefineParams,
) -> RelocResult {
    let Some(start) = initial.pose else {
        return initial.clone();
    };
    if initial.status != RelocStatus::Ok || initial.correspondences.is_empty() {
        return initial.clone();
    }
    let corr = &initial.correspondences;
    let delta = params.huber_delta;

    let mut pose = start;
    let mut cost = robust_cost(&pose, observations, map_objects, corr, k, delta);
    let initial_cost = cost;
    let mut lambda = 1e-3;
    let mut consecutive_rejections = 0usize;
    let mut improved = false;

    for _ in 0..params.max_iterations {
        let r = residuals(&pose, observations, map_objects, corr, k, delta);
        let j = jacobian(&pose, observations, map_objects, corr, k, delta, params.fd_step);
        let g = j.transpose() * &r;
        if (2.0 * g.amax()) < params.gradient_tol {
            break;
        }
        let jtj = j.transpose() * &j;
        let mut accepted = false;
        while consecutive_rejections < 10 {
            let mut damped = Matrix6::from_iterator(jtj.iter().copied());
            for d in 0..6 {
                damped[(d, d)] += lambda;
            }
            let Some(step) = damped.lu().solve(&Vector6::from_iterator((-&g).iter().copied()))
            else {
                lambda *= 10.0;
                consecutive_rejections += 1;
                continue;
            };
            let candidate = pose.retract(&step);
            let candidate_cost =
                robust_cost(&candidate, observations, map_objects, corr, k, delta);
            if candidate_cost < cost {
                pose = candidate;
                cost = candidate_cost;
                lambda = (lambda / 3.0).max(1e-12);
                consecutive_rejections = 0;
                improved = true;
                accepted = true;
                if step.norm() < params.step_tol {
                    return finish(initial, pose, cost, false);
                }
                break;
            }
            lambda = (lambda * 10.0).min(1e12);
            consecutive_rejections += 1;
        }
        if !accepted {
            if improved {
                break; // converged: no further descent possible
            }
            let mut out = initial.clone();
            out.refinement_failed = true;
            out.final_cost = initial_cost;
            return out;
        }
    }
    finish(initial, pose, cost, false)
}

fn finish(initial: &RelocResult, pose: Pose, cost: f64, failed: bool) -> RelocResult {
    let mut out = initial.clone();
    out.pose = Some(pose);
    out.final_cost = cost;
    out.refinement_failed = failed;
    out
}
