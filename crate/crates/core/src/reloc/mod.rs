//! Object-based camera relocalization: observation-ellipse extraction
//! from detections, P3P-loop correspondence search against the
//! ellipsoidal map, and robust Wasserstein pose refinement.

mod p3p;
mod refine;

pub use p3p::p3p_pose;
pub use refine::{cost_gradient, refine_pose, robust_cost, RefineParams};

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use thiserror::Error;

use crate::frame::Detection2D;
use crate::geometry::{
    fit_ellipse_to_points, inscribed_ellipse, project_ellipsoid, wasserstein2_sq, CameraIntrinsics,
    Ellipse, Ellipsoid, Pose,
};
use crate::polygon;

/// Normalized-W2² inlier threshold for candidate-pose scoring.
pub const TAU_INLIER: f64 = 1.0;
/// Default cap on evaluated correspondence triplets.
pub const DEFAULT_MAX_TRIPLETS: usize = 5000;
/// Minimum convexity ratio (area / hull area) for a regular object.
pub const REGULAR_CONVEXITY_MIN: f64 = 0.9;

#[derive(Debug, Clone, Error)]
pub enum RelocError {
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// How an observation ellipse was obtained from its detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllipseSource {
    /// Covariance fit over the interior of a regular-object mask.
    MaskFit,
    /// Ellipse inscribed in the detection bounding box.
    BBoxInscribed,
}

/// A 2D observation used for relocalization.
#[derive(Debug, Clone)]
pub struct ObservationEllipse {
    pub ellipse: Ellipse,
    pub class_id: i32,
    pub source: EllipseSource,
    /// Ellipse area in px²; the per-residual normalization scale.
    pub area: f64,
}

impl ObservationEllipse {
    pub fn new(ellipse: Ellipse, class_id: i32, source: EllipseSource) -> Self {
        let area = ellipse.area();
        Self { ellipse, class_id, source, area }
    }
}

/// Outcome of a relocalization query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelocStatus {
    Ok,
    NoSolution,
}

/// Pose estimate with its supporting correspondences. `correspondences`
/// holds `(observation index, map object index)` pairs — the mapping
/// f(·) — and is sorted by observation index.
#[derive(Debug, Clone)]
pub struct RelocResult {
    pub pose: Option<Pose>,
    pub correspondences: Vec<(usize, usize)>,
    pub inlier_count: usize,
    pub final_cost: f64,
    pub status: RelocStatus,
    /// Set when refinement diverged and the initial pose was kept.
    pub refinement_failed: bool,
}

impl RelocResult {
    pub fn no_solution() -> Self {
        Self {
            pose: None,
            correspondences: Vec::new(),
            inlier_count: 0,
            final_cost: f64::INFINITY,
            status: RelocStatus::NoSolution,
            refinement_failed: false,
        }
    }
}

/// True when a mask polygon qualifies as a regular object: convexity
/// ratio at least 0.9 and a simplified boundary of 3–6 vertices
/// (tolerance 2% of the perimeter).
pub fn classify_regular(mask: &[Vector2<f64>]) -> bool {
    if mask.len() < 3 {
        return false;
    }
    let area = polygon::area(mask);
    if area < 1e-9 {
        return false;
    }
    let hull = polygon::convex_hull(mask);
    if hull.len() < 3 {
        return false;
    }
    let hull_area = polygon::area(&hull);
    if hull_area < 1e-12 || area / hull_area < REGULAR_CONVEXITY_MIN {
        return false;
    }
    let tol = 0.02 * polygon::perimeter(mask);
    let simplified = polygon::simplify_closed(mask, tol);
    (3..=6).contains(&simplified.len())
}

/// Build the observation ellipse for a detection: covariance fit over
/// the mask interior for regular objects, otherwise the ellipse
/// inscribed in the bounding box. A degenerate mask fit silently falls
/// back to the inscribed ellipse.
pub fn observation_ellipse(det: &Detection2D) -> Result<ObservationEllipse, RelocError> {
    if let Some(mask) = det.mask_points() {
        if classify_regular(&mask) {
            if let Some(ellipse) = fit_mask_interior(&mask) {
                return Ok(ObservationEllipse::new(ellipse, det.class_id, EllipseSource::MaskFit));
            }
        }
    }
    let ellipse = inscribed_ellipse(&det.bbox)
        .map_err(|e| RelocError::InvalidArgument(format!("degenerate bbox: {e}")))?;
    Ok(ObservationEllipse::new(ellipse, det.class_id, EllipseSource::BBoxInscribed))
}

fn fit_mask_interior(mask: &[Vector2<f64>]) -> Option<Ellipse> {
    let max_x = mask.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let max_y = mask.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    if !max_x.is_finite() || !max_y.is_finite() || max_x < 0.0 || max_y < 0.0 {
        return None;
    }
    let pixels = polygon::rasterize(mask, max_x.ceil() as u32 + 1, max_y.ceil() as u32 + 1);
    let points: Vec<Vector2<f64>> = pixels
        .iter()
        .map(|&(x, y)| Vector2::new(x as f64 + 0.5, y as f64 + 0.5))
        .collect();
    fit_ellipse_to_points(&points).ok()
}

/// P3P-loop correspondence search: enumerates class-consistent
/// observation/object triplets (exhaustively when they fit in
/// `max_iters`, otherwise a seeded uniform sample), solves P3P on the
/// center pairs, and scores each candidate pose by the number of
/// observations whose class-matched map projection lies within
/// [`TAU_INLIER`] in area-normalized squared Wasserstein distance.
pub fn correspondence_search(
    observations: &[ObservationEllipse],
    map_objects: &[Ellipsoid],
    k: &CameraIntrinsics,
    max_iters: usize,
) -> RelocResult {
    // Class-compatible map candidates per observation.
    let candidates: Vec<Vec<usize>> = observations
        .iter()
        .map(|o| {
            map_objects
                .iter()
                .enumerate()
                .filter(|(_, m)| m.class_id == o.class_id)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let usable: Vec<usize> = (0..observations.len()).filter(|&i| !candidates[i].is_empty()).collect();
    if usable.len() < 3 {
        return RelocResult::no_solution();
    }

    // Enumerate all class-consistent triplets with distinct map objects.
    let mut triplets: Vec<[(usize, usize); 3]> = Vec::new();
    for a in 0..usable.len() {
        for b in (a + 1)..usable.len() {
            for c in (b + 1)..usable.len() {
                let (oi, oj, ol) = (usable[a], usable[b], usable[c]);
                for &mi in &candidates[oi] {
                    for &mj in &candidates[oj] {
                        if mj == mi {
                            continue;
                        }
                        for &ml in &candidates[ol] {
                            if ml == mi || ml == mj {
                                continue;
                            }
                            triplets.push([(oi, mi), (oj, mj), (ol, ml)]);
                        }
                    }
                }
            }
        }
    }
    if triplets.is_empty() {
        return RelocResult::no_solution();
    }
    let selected: Vec<usize> = if triplets.len() <= max_iters {
        (0..triplets.len()).collect()
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x0b7ec75);
        let mut idx: Vec<usize> =
            rand::seq::index::sample(&mut rng, triplets.len(), max_iters).into_vec();
        idx.sort_unstable();
        idx
    };

    let mut best: Option<(usize, f64, Pose, Vec<(usize, usize)>)> = None;
    for &ti in &selected {
        let triplet = &triplets[ti];
        let world: Vec<Vector3<f64>> = triplet.iter().map(|&(_, m)| map_objects[m].center).collect();
        let image: Vec<Vector2<f64>> =
            triplet.iter().map(|&(o, _)| observations[o].ellipse.center()).collect();
        let Ok(poses) = p3p_pose(
            &[world[0], world[1], world[2]],
            &[image[0], image[1], image[2]],
            k,
        ) else {
            continue;
        };
        for pose in &poses {
            let (pairs, cost) = score_pose(pose, observations, map_objects, k);
            let better = match &best {
                None => pairs.len() >= 3,
                Some((bn, bc, _, _)) => {
                    pairs.len() > *bn || (pairs.len() == *bn && cost < *bc - 1e-15)
                }
            };
            if better {
                best = Some((pairs.len(), cost, *pose, pairs));
            }
        }
    }
    match best {
        Some((n, _, pose, pairs)) if n >= 3 => {
            // P3P matches projected 3D centers to ellipse centers, but
            // the center of a projected ellipsoid's ellipse is offset
            // from the projected center point (perspective bias).
            // Polish the winner by aligning predicted ellipse centers
            // with the observed ones, then rescore.
            let polished = polish_center_alignment(&pose, observations, map_objects, &pairs, k);
            let (mut pairs, cost) = score_pose(&polished, observations, map_objects, k);
            if pairs.len() < 3 {
                return RelocResult::no_solution();
            }
            pairs.sort_unstable_by_key(|&(o, _)| o);
            RelocResult {
                pose: Some(polished),
                inlier_count: pairs.len(),
                final_cost: cost,
                correspondences: pairs,
                status: RelocStatus::Ok,
                refinement_failed: false,
            }
        }
        _ => RelocResult::no_solution(),
    }
}

/// Gauss–Newton alignment of predicted ellipse centers (projections of
/// the matched map ellipsoids) onto observed ellipse centers. Since
/// prediction and observation carry the same perspective bias, exact
/// observations have a zero-residual optimum at the true pose.
fn polish_center_alignment(
    pose: &Pose,
    observations: &[ObservationEllipse],
    map_objects: &[Ellipsoid],
    pairs: &[(usize, usize)],
    k: &CameraIntrinsics,
) -> Pose {
    use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
    let residuals = |p: &Pose| -> Option<DVector<f64>> {
        let mut r = DVector::zeros(2 * pairs.len());
        for (row, &(o, m)) in pairs.iter().enumerate() {
            let proj = project_ellipsoid(&map_objects[m], p, k).ok()?;
            let d = proj.center() - observations[o].ellipse.center();
            r[2 * row] = d.x;
            r[2 * row + 1] = d.y;
        }
        Some(r)
    };
    let mut current = *pose;
    let Some(mut r) = residuals(&current) else { return current };
    let h = 1e-6;
    for _ in 0..15 {
        if r.norm() < 1e-10 {
            break;
        }
        let mut jac = DMatrix::zeros(r.len(), 6);
        let mut degenerate = false;
        for col in 0..6 {
            let mut step = Vector6::zeros();
            step[col] = h;
            let Some(plus) = residuals(&current.retract(&step)) else {
                degenerate = true;
                break;
            };
            step[col] = -h;
            let Some(minus) = residuals(&current.retract(&step)) else {
                degenerate = true;
                break;
            };
            jac.set_column(col, &((plus - minus) / (2.0 * h)));
        }
        if degenerate {
            break;
        }
        let mut jtj = Matrix6::from_iterator((jac.transpose() * &jac).iter().copied());
        for d in 0..6 {
            jtj[(d, d)] += 1e-9;
        }
        let g = Vector6::from_iterator((jac.transpose() * &r).iter().copied());
        let Some(step) = jtj.lu().solve(&(-g)) else { break };
        let candidate = current.retract(&step);
        match residuals(&candidate) {
            Some(rc) if rc.norm() < r.norm() => {
                current = candidate;
                r = rc;
                if step.norm() < 1e-12 {
                    break;
                }
            }
            _ => break,
        }
    }
    current
}

/// Greedy one-to-one inlier assignment under a candidate pose: all
/// class-matched (observation, object) pairs with normalized W2² below
/// the threshold, consumed in increasing-distance order.
fn score_pose(
    pose: &Pose,
    observations: &[ObservationEllipse],
    map_objects: &[Ellipsoid],
    k: &CameraIntrinsics,
) -> (Vec<(usize, usize)>, f64) {
    let mut scored: Vec<(f64, usize, usize)> = Vec::new();
    for (o, obs) in observations.iter().enumerate() {
        for (m, obj) in map_objects.iter().enumerate() {
            if obj.class_id != obs.class_id {
                continue;
            }
            let Ok(proj) = project_ellipsoid(obj, pose, k) else { continue };
            let d = wasserstein2_sq(&obs.ellipse, &proj) / obs.area;
            if d < TAU_INLIER {
                scored.push((d, o, m));
            }
        }
    }
    scored.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    });
    let mut used_obs = vec![false; observations.len()];
    let mut used_map = vec![false; map_objects.len()];
    let mut pairs = Vec::new();
    let mut cost = 0.0;
    for (d, o, m) in scored {
        if used_obs[o] || used_map[m] {
            continue;
        }
        used_obs[o] = true;
        used_map[m] = true;
        pairs.push((o, m));
        cost += d;
    }
    (pairs, cost)
}
