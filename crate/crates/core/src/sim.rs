//! Synthetic RGBD scene simulator: ellipsoidal objects, camera
//! trajectories, exact per-pixel depth via ray–ellipsoid intersection,
//! instance-mask polygons, and seeded detection noise. Serves as the
//! ground-truth oracle for the mapping and relocalization pipeline.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{BBox, DepthMap, Detection2D, Frame};
use crate::geometry::{
    ellipsoid_from_pose_size, project_ellipsoid, CameraIntrinsics, Ellipsoid, Pose,
};

#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One ground-standing object of a scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneObject {
    pub class_id: i32,
    pub center: [f64; 3],
    /// Rotation about the world z axis, radians.
    pub yaw: f64,
    /// Full extents (length, width, height) in meters.
    pub size: (f64, f64, f64),
}

impl SceneObject {
    pub fn ellipsoid(&self) -> Result<Ellipsoid, SimError> {
        let mut e = ellipsoid_from_pose_size(
            Vector3::new(self.center[0], self.center[1], self.center[2]),
            self.yaw,
            self.size,
        )
        .map_err(|e| SimError::InvalidArgument(e.to_string()))?;
        e.class_id = self.class_id;
        Ok(e)
    }
}

/// Detection corruption parameters; all zero means noiseless output.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Std-dev of Gaussian jitter applied to bbox corners, pixels.
    pub bbox_jitter_px: f64,
    /// Probability that a detection loses its mask (bbox kept).
    pub mask_dropout_prob: f64,
    /// Probability that a detection's class id is replaced by another
    /// class present in the scene.
    pub class_confusion_prob: f64,
    /// Std-dev of per-pixel Gaussian depth noise, meters.
    pub depth_noise_m: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            bbox_jitter_px: 0.0,
            mask_dropout_prob: 0.0,
            class_confusion_prob: 0.0,
            depth_noise_m: 0.0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, p) in [
            ("mask_dropout_prob", self.mask_dropout_prob),
            ("class_confusion_prob", self.class_confusion_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidArgument(format!("{name} = {p} outside [0, 1]")));
            }
        }
        for (name, s) in [
            ("bbox_jitter_px", self.bbox_jitter_px),
            ("depth_noise_m", self.depth_noise_m),
        ] {
            if s < 0.0 || !s.is_finite() {
                return Err(SimError::InvalidArgument(format!("{name} = {s} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// A fully specified synthetic scene: objects, camera, trajectory,
/// noise, and the master seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub objects: Vec<SceneObject>,
    pub camera: CameraIntrinsics,
    /// (timestamp seconds, world-to-camera pose) per frame.
    pub trajectory: Vec<(f64, Pose)>,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl SceneSpec {
    /// Checks noise ranges, timestamps, and pairwise object
    /// separation (center distance must exceed the sum of the largest
    /// semi-axes).
    pub fn validate(&self) -> Result<(), SimError> {
        self.noise.validate()?;
        for w in self.trajectory.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(SimError::InvalidArgument(format!(
                    "timestamps not strictly increasing at {} -> {}",
                    w[0].0, w[1].0
                )));
            }
        }
        let ellipsoids: Vec<Ellipsoid> =
            self.objects.iter().map(|o| o.ellipsoid()).collect::<Result<_, _>>()?;
        for i in 0..ellipsoids.len() {
            for j in (i + 1)..ellipsoids.len() {
                let d = (ellipsoids[i].center - ellipsoids[j].center).norm();
                let r = ellipsoids[i].semi_axes.max() + ellipsoids[j].semi_axes.max();
                if d <= r {
                    return Err(SimError::InvalidArgument(format!(
                        "objects {i} and {j} overlap (distance {d:.3} <= {r:.3})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The exact ellipsoids of the scene; the oracle for mapping metrics.
pub fn ground_truth_map(scene: &SceneSpec) -> Result<Vec<Ellipsoid>, SimError> {
    scene.objects.iter().map(|o| o.ellipsoid()).collect()
}

/// Camera trajectory recipes.
#[derive(Debug, Clone)]
pub enum TrajectorySpec {
    /// Poses on a horizontal circle, all looking at `center`.
    Orbit { center: Vector3<f64>, radius: f64, height: f64, steps: usize },
    /// A circular arc between two azimuth angles (radians).
    Arc {
        center: Vector3<f64>,
        radius: f64,
        height: f64,
        start_angle: f64,
        end_angle: f64,
        steps: usize,
    },
    /// An input trajectory rotated about `center` (vertical axis) by
    /// `offset_angle` radians.
    OffsetReplay { base: Vec<Pose>, center: Vector3<f64>, offset_angle: f64 },
}

pub fn generate_trajectory(spec: &TrajectorySpec) -> Result<Vec<Pose>, SimError> {
    match spec {
        TrajectorySpec::Orbit { center, radius, height, steps } => {
            if *radius <= 0.0 || *steps == 0 {
                return Err(SimError::InvalidArgument(
                    "orbit needs radius > 0 and steps > 0".into(),
                ));
            }
            (0..*steps)
                .map(|i| {
                    let theta = 2.0 * std::f64::consts::PI * i as f64 / *steps as f64;
                    orbit_pose(center, *radius, *height, theta)
                })
                .collect()
        }
        TrajectorySpec::Arc { center, radius, height, start_angle, end_angle, steps } => {
            if *radius <= 0.0 || *steps == 0 {
                return Err(SimError::InvalidArgument(
                    "arc needs radius > 0 and steps > 0".into(),
                ));
            }
            (0..*steps)
                .map(|i| {
                    let t = if *steps == 1 {
                        0.0
                    } else {
                        i as f64 / (*steps as f64 - 1.0)
                    };
                    orbit_pose(center, *radius, *height, start_angle + t * (end_angle - start_angle))
                })
                .collect()
        }
        TrajectorySpec::OffsetReplay { base, center, offset_angle } => {
            let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), *offset_angle);
            Ok(base
                .iter()
                .map(|pose| {
                    // World-space map T(p) = R (p - c) + c; the new
                    // world-to-camera transform is pose ∘ T⁻¹.
                    let r_new = pose.rotation() * rot.inverse();
                    let t_new = pose.translation()
                        + pose.rotation() * (center - rot.inverse() * center);
                    Pose::from_parts(r_new, t_new)
                })
                .collect())
        }
    }
}

fn orbit_pose(center: &Vector3<f64>, radius: f64, height: f64, theta: f64) -> Result<Pose, SimError> {
    let eye = center + Vector3::new(radius * theta.cos(), radius * theta.sin(), height);
    Pose::look_at(eye, *center, Vector3::new(0.0, 0.0, 1.0))
        .map_err(|e| SimError::InvalidArgument(e.to_string()))
}

/// The noiseless render of one viewpoint: exact depth plus per-object
/// masks (boundary polygon, pixel-extent bbox and pixel count).
#[derive(Debug, Clone)]
pub struct RenderedObject {
    pub object_index: usize,
    pub class_id: i32,
    /// Boundary polygon through the centers of boundary pixels.
    pub mask: Vec<Vector2<f64>>,
    pub bbox: BBox,
    pub pixel_count: usize,
}

/// Render exact depth and instance masks for one pose by casting a ray
/// per pixel and keeping the nearest ray–ellipsoid intersection.
pub fn render_clean(
    scene: &SceneSpec,
    pose: &Pose,
) -> Result<(DepthMap, Vec<RenderedObject>), SimError> {
    let k = &scene.camera;
    let (w, h) = (k.width, k.height);
    let mut depth = DepthMap::new(w, h);
    let mut winner: Vec<i32> = vec![-1; (w * h) as usize];
    let cam_center = pose.camera_center();
    let inv_rot = pose.rotation().inverse();

    for (oi, obj) in scene.objects.iter().enumerate() {
        let e = obj.ellipsoid()?;
        // Screen-space culling: only pixels under the projected
        // ellipse's bounding box (plus a guard band) can hit.
        let Ok(proj) = project_ellipsoid(&e, pose, k) else { continue };
        let cov = proj.covariance();
        let (cx, cy) = (proj.center().x, proj.center().y);
        let hx = cov[(0, 0)].max(0.0).sqrt() + 2.0;
        let hy = cov[(1, 1)].max(0.0).sqrt() + 2.0;
        let x0 = (cx - hx).floor().max(0.0) as u32;
        let x1 = ((cx + hx).ceil() as i64).clamp(0, w as i64) as u32;
        let y0 = (cy - hy).floor().max(0.0) as u32;
        let y1 = ((cy + hy).ceil() as i64).clamp(0, h as i64) as u32;

        let rot_e = e.rotation.inverse();
        let axes = e.semi_axes;
        for y in y0..y1 {
            for x in x0..x1 {
                let px = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
                // Ray with unit camera-z component: the parameter t is
                // exactly the camera-frame depth.
                let dir_world = inv_rot * k.ray_direction(&px);
                // Into the ellipsoid's unit-sphere frame.
                let o = (rot_e * (cam_center - e.center)).component_div(&axes);
                let d = (rot_e * dir_world).component_div(&axes);
                let a = d.dot(&d);
                let b = 2.0 * o.dot(&d);
                let c = o.dot(&o) - 1.0;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    continue;
                }
                let sq = disc.sqrt();
                let t0 = (-b - sq) / (2.0 * a);
                let t1 = (-b + sq) / (2.0 * a);
                let t = if t0 > 1e-9 { t0 } else { t1 };
                if t <= 1e-9 {
                    continue;
                }
                let idx = (y * w + x) as usize;
                let current = depth.get(x, y);
                if current == 0.0 || (t as f32) < current {
                    depth.set(x, y, t as f32);
                    winner[idx] = oi as i32;
                }
            }
        }
    }

    let mut rendered = Vec::new();
    for (oi, obj) in scene.objects.iter().enumerate() {
        let pixels: Vec<(u32, u32)> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| winner[(y * w + x) as usize] == oi as i32)
            .collect();
        if pixels.len() < 3 {
            continue;
        }
        let component = largest_component(&pixels);
        let Some(mask) = trace_boundary(&component) else { continue };
        let (min_x, max_x) = pixels.iter().map(|p| p.0).fold((u32::MAX, 0), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        let (min_y, max_y) = pixels.iter().map(|p| p.1).fold((u32::MAX, 0), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        rendered.push(RenderedObject {
            object_index: oi,
            class_id: obj.class_id,
            mask,
            bbox: BBox::from_corners(
                min_x as f64,
                min_y as f64,
                max_x as f64 + 1.0,
                max_y as f64 + 1.0,
            ),
            pixel_count: pixels.len(),
        });
    }
    Ok((depth, rendered))
}

/// Largest 8-connected component of a pixel set.
fn largest_component(pixels: &[(u32, u32)]) -> Vec<(u32, u32)> {
    use std::collections::{HashSet, VecDeque};
    let set: HashSet<(u32, u32)> = pixels.iter().copied().collect();
    let mut seen: HashSet<(u32, u32)> = HashSet::new();
    let mut best: Vec<(u32, u32)> = Vec::new();
    for &start in pixels {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some((x, y)) = queue.pop_front() {
            comp.push((x, y));
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    if nx < 0 || ny < 0 {
                        continue;
                    }
                    let n = (nx as u32, ny as u32);
                    if set.contains(&n) && seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

/// Moore-neighbor boundary tracing over a pixel set; returns the outer
/// boundary polygon through pixel centers (counter-clockwise in image
/// coordinates).
fn trace_boundary(pixels: &[(u32, u32)]) -> Option<Vec<Vector2<f64>>> {
    use std::collections::HashSet;
    if pixels.is_empty() {
        return None;
    }
    let set: HashSet<(i64, i64)> = pixels.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
    // Start: topmost of the leftmost pixels.
    let &start = pixels
        .iter()
        .min_by_key(|&&(x, y)| (x, y))
        .expect("non-empty");
    let start = (start.0 as i64, start.1 as i64);
    // Moore neighborhood in clockwise order starting from west.
    const NB: [(i64, i64); 8] = [
        (-1, 0),
        (-1, -1),
        (0, -1),
        (1, -1),
        (1, 0),
        (1, 1),
        (0, 1),
        (-1, 1),
    ];
    let mut boundary = vec![start];
    let mut current = start;
    // Backtrack direction: we entered `start` from the west.
    let mut backtrack = 0usize;
    loop {
        let mut found = None;
        for step in 0..8 {
            let dir = (backtrack + 1 + step) % 8;
            let cand = (current.0 + NB[dir].0, current.1 + NB[dir].1);
            if set.contains(&cand) {
                found = Some((cand, dir));
                break;
            }
        }
        let Some((next, dir)) = found else {
            break; // isolated pixel
        };
        if next == start && boundary.len() > 1 {
            break;
        }
        boundary.push(next);
        current = next;
        // New backtrack: the direction pointing back at the previous
        // pixel.
        backtrack = (dir + 4) % 8;
        if boundary.len() > 8 * pixels.len() {
            break; // safety net; cannot happen on consistent input
        }
    }
    if boundary.len() < 3 {
        // Degenerate (1-2 pixel) regions: synthesize a small triangle
        // around the pixel centers so downstream polygon code works.
        let (x, y) = (start.0 as f64 + 0.5, start.1 as f64 + 0.5);
        return Some(vec![
            Vector2::new(x - 0.5, y + 0.4),
            Vector2::new(x + 0.5, y + 0.4),
            Vector2::new(x, y - 0.4),
        ]);
    }
    Some(
        boundary
            .iter()
            .map(|&(x, y)| Vector2::new(x as f64 + 0.5, y as f64 + 0.5))
            .collect(),
    )
}

/// The deterministic per-frame noise generator: one stream per frame
/// index, derived from the scene seed.
pub fn frame_rng(scene_seed: u64, frame_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        scene_seed ^ frame_index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x5EED),
    )
}

/// Apply detection noise in fixed order: mask dropout, class
/// confusion, bbox jitter.
pub fn corrupt_detections(
    rendered: &[RenderedObject],
    noise: &NoiseSpec,
    class_pool: &[i32],
    rng: &mut ChaCha8Rng,
) -> Vec<Detection2D> {
    let jitter = Normal::new(0.0, noise.bbox_jitter_px.max(1e-300)).expect("valid std");
    rendered
        .iter()
        .map(|r| {
            let mut mask = Some(r.mask.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>());
            if noise.mask_dropout_prob > 0.0 && rng.gen::<f64>() < noise.mask_dropout_prob {
                mask = None;
            }
            let mut class_id = r.class_id;
            if noise.class_confusion_prob > 0.0 && rng.gen::<f64>() < noise.class_confusion_prob {
                let others: Vec<i32> =
                    class_pool.iter().copied().filter(|&c| c != r.class_id).collect();
                if !others.is_empty() {
                    class_id = others[rng.gen_range(0..others.len())];
                }
            }
            let bbox = if noise.bbox_jitter_px > 0.0 {
                BBox::from_corners(
                    r.bbox.x + jitter.sample(rng),
                    r.bbox.y + jitter.sample(rng),
                    r.bbox.x + r.bbox.w + jitter.sample(rng),
                    r.bbox.y + r.bbox.h + jitter.sample(rng),
                )
            } else {
                r.bbox
            };
            Detection2D { class_id, score: 1.0, bbox, mask }
        })
        .collect()
}

/// Add per-pixel Gaussian noise to valid depth values.
pub fn corrupt_depth(depth: &mut DepthMap, noise: &NoiseSpec, rng: &mut ChaCha8Rng) {
    if noise.depth_noise_m <= 0.0 {
        return;
    }
    let dist = Normal::new(0.0, noise.depth_noise_m).expect("valid std");
    for v in depth.data_mut() {
        if *v > 0.0 {
            *v = (*v as f64 + dist.sample(rng)).max(0.001) as f32;
        }
    }
}

/// Render one fully corrupted frame of the scene trajectory.
pub fn render_frame(scene: &SceneSpec, frame_index: usize) -> Result<Frame, SimError> {
    let Some(&(timestamp, pose)) = scene.trajectory.get(frame_index) else {
        return Err(SimError::InvalidArgument(format!(
            "frame index {frame_index} out of range ({} frames)",
            scene.trajectory.len()
        )));
    };
    let (mut depth, rendered) = render_clean(scene, &pose)?;
    let class_pool: Vec<i32> = {
        let mut v: Vec<i32> = scene.objects.iter().map(|o| o.class_id).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut rng = frame_rng(scene.seed, frame_index as u64);
    let detections = corrupt_detections(&rendered, &scene.noise, &class_pool, &mut rng);
    corrupt_depth(&mut depth, &scene.noise, &mut rng);
    Ok(Frame {
        timestamp,
        depth,
        detections,
        pose: Some(pose),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polygon;

    fn unit_sphere_scene(camera_z: f64) -> SceneSpec {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let pose = Pose::look_at(
            Vector3::new(0.0, 0.0, camera_z),
            Vector3::zeros(),
            Vector3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        SceneSpec {
            objects: vec![SceneObject {
                class_id: 1,
                center: [0.0, 0.0, 0.0],
                yaw: 0.0,
                size: (2.0, 2.0, 2.0),
            }],
            camera: k,
            trajectory: vec![(0.0, pose)],
            noise: NoiseSpec::default(),
            seed: 1,
        }
    }

    #[test]
    fn sphere_renders_centered_disk() {
        let scene = unit_sphere_scene(-5.0);
        let pose = scene.trajectory[0].1;
        let (depth, rendered) = render_clean(&scene, &pose).unwrap();
        assert_eq!(rendered.len(), 1);
        let r = &rendered[0];
        // Expected silhouette radius of a unit sphere at distance 5
        // with f = 500: 500 / sqrt(24).
        let expected = 500.0 / 24f64.sqrt();
        let half_w = r.bbox.w / 2.0;
        let half_h = r.bbox.h / 2.0;
        assert!((half_w - expected).abs() < 1.0, "half width {half_w} vs {expected}");
        assert!((half_h - expected).abs() < 1.0);
        let c = r.bbox.center();
        assert!((c.x - 320.0).abs() < 1.0 && (c.y - 240.0).abs() < 1.0);
        // Depth at the disk center is 4 m (5 - 1 along the axis); the
        // probed pixel center sits half a pixel off the principal
        // point, which bends the ray by ~1e-5 m of sphere sag.
        assert!((depth.get(320, 240) as f64 - 4.0).abs() < 1e-4);
    }

    #[test]
    fn occluded_sphere_is_absent() {
        let mut scene = unit_sphere_scene(-8.0);
        // Identical-size sphere directly behind the first one.
        scene.objects.push(SceneObject {
            class_id: 2,
            center: [0.0, 0.0, 4.0],
            yaw: 0.0,
            size: (2.0, 2.0, 2.0),
        });
        let pose = scene.trajectory[0].1;
        let (_, rendered) = render_clean(&scene, &pose).unwrap();
        assert_eq!(rendered.len(), 1);
        assert_eq!(rendered[0].object_index, 0);
    }

    #[test]
    fn mask_matches_analytic_ellipse() {
        let scene = unit_sphere_scene(-5.0);
        let pose = scene.trajectory[0].1;
        let (_, rendered) = render_clean(&scene, &pose).unwrap();
        let mask = &rendered[0].mask;
        let e = project_ellipsoid(&scene.objects[0].ellipsoid().unwrap(), &pose, &scene.camera)
            .unwrap();
        // Every pixel strictly inside the analytic ellipse (1 px
        // margin) must be inside the mask polygon, and vice versa.
        let cov_inv = e.covariance().try_inverse().unwrap();
        for y in 180..300u32 {
            for x in 260..380u32 {
                let p = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
                let d = p - e.center();
                let m = (d.transpose() * cov_inv * d)[0].sqrt();
                let inside_mask = polygon::contains_point(mask, &p);
                let band = 1.5 / e.semi_axes().y; // 1-px band in Mahalanobis units
                if m < 1.0 - band {
                    assert!(inside_mask, "pixel ({x},{y}) inside ellipse but outside mask");
                }
                if m > 1.0 + band {
                    assert!(!inside_mask, "pixel ({x},{y}) outside ellipse but inside mask");
                }
            }
        }
    }

    #[test]
    fn depth_satisfies_ray_equation() {
        let scene = unit_sphere_scene(-5.0);
        let pose = scene.trajectory[0].1;
        let (depth, _) = render_clean(&scene, &pose).unwrap();
        let e = scene.objects[0].ellipsoid().unwrap();
        let mut checked = 0;
        for y in (0..480).step_by(7) {
            for x in (0..640).step_by(7) {
                let d = depth.get(x, y);
                if d == 0.0 {
                    continue;
                }
                let p_world = pose.inverse().transform_point(&scene.camera.backproject(
                    &Vector2::new(x as f64 + 0.5, y as f64 + 0.5),
                    d as f64,
                ));
                let local = (e.rotation.inverse() * (p_world - e.center)).component_div(&e.semi_axes);
                assert!(
                    (local.norm() - 1.0).abs() < 1e-6,
                    "pixel ({x},{y}) off surface by {}",
                    (local.norm() - 1.0).abs()
                );
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn rendering_is_deterministic() {
        let mut scene = unit_sphere_scene(-5.0);
        scene.noise = NoiseSpec {
            bbox_jitter_px: 2.0,
            mask_dropout_prob: 0.3,
            class_confusion_prob: 0.2,
            depth_noise_m: 0.01,
        };
        let f1 = render_frame(&scene, 0).unwrap();
        let f2 = render_frame(&scene, 0).unwrap();
        assert_eq!(f1.depth.data(), f2.depth.data());
        assert_eq!(
            serde_json::to_string(&f1.detections).unwrap(),
            serde_json::to_string(&f2.detections).unwrap()
        );
    }

    #[test]
    fn orbit_spacing_and_look_at() {
        let center = Vector3::new(0.1, -0.2, 0.3);
        let traj = generate_trajectory(&TrajectorySpec::Orbit {
            center,
            radius: 3.0,
            height: 1.5,
            steps: 36,
        })
        .unwrap();
        assert_eq!(traj.len(), 36);
        for w in traj.windows(2) {
            let a = (w[0].camera_center() - center).xy();
            let b = (w[1].camera_center() - center).xy();
            let ang = (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos();
            assert!((ang - 10f64.to_radians()).abs() < 1e-9);
        }
        for p in &traj {
            // The scene center must lie on the optical axis.
            let c = p.transform_point(&center);
            assert!(c.x.abs() < 1e-9 && c.y.abs() < 1e-9 && c.z > 0.0);
        }
    }

    #[test]
    fn offset_replay_zero_is_identity() {
        let base = generate_trajectory(&TrajectorySpec::Orbit {
            center: Vector3::zeros(),
            radius: 3.0,
            height: 1.0,
            steps: 12,
        })
        .unwrap();
        let replay = generate_trajectory(&TrajectorySpec::OffsetReplay {
            base: base.clone(),
            center: Vector3::zeros(),
            offset_angle: 0.0,
        })
        .unwrap();
        for (a, b) in base.iter().zip(replay.iter()) {
            assert!(a.rotation_angle_to(b) < 1e-7);
            assert!((a.translation() - b.translation()).norm() < 1e-12);
        }
    }

    #[test]
    fn offset_replay_rotates_camera_centers() {
        let center = Vector3::new(0.5, -0.5, 0.0);
        let base = generate_trajectory(&TrajectorySpec::Orbit {
            center,
            radius: 3.0,
            height: 1.2,
            steps: 10,
        })
        .unwrap();
        let offset = 30f64.to_radians();
        let replay = generate_trajectory(&TrajectorySpec::OffsetReplay {
            base: base.clone(),
            center,
            offset_angle: offset,
        })
        .unwrap();
        let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), offset);
        for (a, b) in base.iter().zip(replay.iter()) {
            let expected = rot * (a.camera_center() - center) + center;
            assert!((b.camera_center() - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn ground_truth_map_matches_scene_objects() {
        let scene = unit_sphere_scene(-5.0);
        let map = ground_truth_map(&scene).unwrap();
        assert_eq!(map.len(), 1);
        let q = map[0].dual_form();
        let expected = nalgebra::Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, 1.0, -1.0));
        assert!((q - expected).abs().max() < 1e-12);
    }

    #[test]
    fn overlap_validation_rejects() {
        let mut scene = unit_sphere_scene(-5.0);
        scene.objects.push(SceneObject {
            class_id: 2,
            center: [0.5, 0.0, 0.0],
            yaw: 0.0,
            size: (2.0, 2.0, 2.0),
        });
        assert!(scene.validate().is_err());
        scene.objects[1].center = [5.0, 0.0, 0.0];
        assert!(scene.validate().is_ok());
    }

    #[test]
    fn mask_dropout_keeps_bbox() {
        let mut scene = unit_sphere_scene(-5.0);
        scene.noise.mask_dropout_prob = 1.0;
        let f = render_frame(&scene, 0).unwrap();
        assert_eq!(f.detections.len(), 1);
        assert!(f.detections[0].mask.is_none());
        assert!(f.detections[0].bbox.area() > 0.0);
    }
}
