//! Batch pipeline stages: map construction from posed frames, map
//! relocalization of query frames, and trajectory-error evaluation.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::ellipsoid_gen::{build_ellipsoid, compute_cuboid, estimate_yaw_pca};
use crate::frame::{Detection2D, Frame};
use crate::geometry::{CameraIntrinsics, Ellipsoid, Pose};
use crate::reloc::{
    correspondence_search, observation_ellipse, refine_pose, ObservationEllipse, RefineParams,
    RelocResult, RelocStatus,
};
use crate::tracking::{association_cost, hungarian_assign, match_3d};
use crate::voxel::{IntegrationParams, ObjectInstanceModel};

use super::config::Config;
use super::map_file::{MapFile, MapObjectRecord};
use super::PipelineError;

/// Mask polygon used for voxel integration: the detection's own mask,
/// or its bounding box as a rectangle.
fn integration_mask(det: &Detection2D) -> Vec<Vector2<f64>> {
    det.mask_points().unwrap_or_else(|| {
        let b = &det.bbox;
        vec![
            Vector2::new(b.x, b.y),
            Vector2::new(b.x + b.w, b.y),
            Vector2::new(b.x + b.w, b.y + b.h),
            Vector2::new(b.x, b.y + b.h),
        ]
    })
}

/// Build the object map from posed keyframes: per frame, 2D
/// association → voxel integration → promotion → 3D instance matching
/// → voxel filtering; finally, ellipsoid generation per promoted
/// object.
pub fn build_map(
    frames: &[Frame],
    k: &CameraIntrinsics,
    config: &Config,
) -> Result<MapFile, PipelineError> {
    if frames.is_empty() {
        return Err(PipelineError::Format("no frames to map".into()));
    }
    let m = &config.mapping;
    let params = IntegrationParams {
        hit_prob: m.hit_prob,
        miss_prob: m.miss_prob,
        class_prior: m.class_prior,
    };
    let mut models: Vec<ObjectInstanceModel> = Vec::new();
    let mut next_id: u64 = 0;

    for (fi, frame) in frames.iter().enumerate() {
        let pose = frame.pose.ok_or_else(|| {
            PipelineError::Format(format!(
                "frame {} (t = {:.6}) lacks a pose; mapping needs posed keyframes",
                fi, frame.timestamp
            ))
        })?;
        if frame.depth.is_empty_depth() {
            return Err(PipelineError::Format(format!(
                "frame {} (t = {:.6}) has no valid depth",
                fi, frame.timestamp
            )));
        }

        // 2D association of detections to existing instances.
        let cost: Vec<Vec<f64>> = models
            .iter()
            .map(|obj| {
                frame
                    .detections
                    .iter()
                    .map(|det| {
                        association_cost(
                            obj,
                            det,
                            &pose,
                            k,
                            config.tracking.lambda1,
                            config.tracking.lambda2,
                        )
                    })
                    .collect()
            })
            .collect();
        // With no instances yet the cost matrix has no rows and the
        // solver cannot see the detection count, so every detection is
        // unmatched by construction.
        let assoc = if models.is_empty() {
            crate::tracking::AssociationResult {
                unmatched_detections: (0..frame.detections.len()).collect(),
                ..Default::default()
            }
        } else {
            hungarian_assign(&cost, config.tracking.gate)
        };

        for &(oi, di) in &assoc.pairs {
            let det = &frame.detections[di];
            let mask = integration_mask(det);
            models[oi].integrate_observation(frame, &mask, &pose, k, &params).ok();
            models[oi].record_class_observation(det.class_id, det.score);
            models[oi].times_tracked += 1;
        }
        for &di in &assoc.unmatched_detections {
            let det = &frame.detections[di];
            let mut model = ObjectInstanceModel::new(next_id, det.class_id, m.resolution);
            next_id += 1;
            let mask = integration_mask(det);
            if model.integrate_observation(frame, &mask, &pose, k, &params).is_ok() {
                model.record_class_observation(det.class_id, det.score);
                model.times_tracked = 1;
                models.push(model);
            }
        }

        // Promotion and 3D instance matching.
        for model in &mut models {
            model.promote_if_ready(m.promotion_min_tracks);
        }
        let radius = m.match_radius_factor * m.resolution;
        let mut merged = true;
        while merged {
            merged = false;
            'outer: for i in 0..models.len() {
                for j in (i + 1)..models.len() {
                    if match_3d(&models[i], &models[j], radius, m.match_xi) {
                        let other = models.remove(j);
                        absorb(&mut models[i], other);
                        merged = true;
                        break 'outer;
                    }
                }
            }
        }

        for model in &mut models {
            model.filter_voxels(m.filter_threshold);
        }
        models.retain(|mo| !mo.is_empty() || mo.times_tracked == 0);
    }

    // Final ellipsoid generation over promoted instances.
    let mut objects = Vec::new();
    for model in models.iter_mut().filter(|mo| mo.promoted && !mo.is_empty()) {
        model.class_id = model.final_label();
        let Ok(yaw) = estimate_yaw_pca(model) else { continue };
        let Ok(cuboid) = compute_cuboid(model, yaw.yaw) else { continue };
        let ellipsoid = build_ellipsoid(&cuboid, model.class_id);
        objects.push(MapObjectRecord::from_parts(
            model.object_id,
            &ellipsoid,
            model.times_tracked,
            Some(model),
        ));
    }
    objects.sort_by_key(|o| o.id);
    Ok(MapFile { objects })
}

/// Merge a duplicate instance into `target`: union of voxels (highest
/// evidence wins on collision), summed track counts and class votes.
fn absorb(target: &mut ObjectInstanceModel, other: ObjectInstanceModel) {
    for (key, voxel) in other.voxels {
        target
            .voxels
            .entry(key)
            .and_modify(|v| {
                if voxel.label_prob > v.label_prob {
                    v.label_prob = voxel.label_prob;
                }
                v.hit_count += voxel.hit_count;
            })
            .or_insert(voxel);
    }
    target.times_tracked += other.times_tracked;
    target.promoted |= other.promoted;
    for (class, w) in other.class_votes {
        *target.class_votes.entry(class).or_insert(0.0) += w;
    }
    target.object_id = target.object_id.min(other.object_id);
}

/// Serializable relocalization outcome for one query frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelocRecord {
    pub timestamp: f64,
    pub status: String,
    /// Camera center (tx, ty, tz), camera-to-world.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<[f64; 3]>,
    /// Camera-to-world unit quaternion (x, y, z, w).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[f64; 4]>,
    pub inlier_count: usize,
    pub final_cost: f64,
    pub refinement_failed: bool,
}

impl RelocRecord {
    pub fn from_result(timestamp: f64, r: &RelocResult) -> Self {
        let (translation, rotation) = match (r.status, r.pose) {
            (RelocStatus::Ok, Some(p)) => {
                let c = p.camera_center();
                let q = p.inverse().to_unit_quaternion();
                (Some([c.x, c.y, c.z]), Some([q.i, q.j, q.k, q.w]))
            }
            _ => (None, None),
        };
        Self {
            timestamp,
            status: match r.status {
                RelocStatus::Ok => "ok".into(),
                RelocStatus::NoSolution => "no-solution".into(),
            },
            translation,
            rotation,
            inlier_count: r.inlier_count,
            final_cost: r.final_cost,
            refinement_failed: r.refinement_failed,
        }
    }

    /// World-to-camera pose, when present.
    pub fn pose(&self) -> Option<Pose> {
        let t = self.translation?;
        let [x, y, z, w] = self.rotation?;
        let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z));
        let rot = q.to_rotation_matrix().inverse();
        Some(Pose::from_parts(rot, -(rot * nalgebra::Vector3::from(t))))
    }
}

/// Relocalize every query frame against the map. Ground-truth poses
/// attached to the frames are deliberately ignored.
pub fn relocalize(
    frames: &[Frame],
    map: &MapFile,
    k: &CameraIntrinsics,
    config: &Config,
) -> Result<Vec<RelocRecord>, PipelineError> {
    if map.objects.is_empty() {
        return Err(PipelineError::Format("map is empty".into()));
    }
    let ellipsoids: Vec<Ellipsoid> =
        map.ellipsoids()?.into_iter().map(|(_, e)| e).collect();
    let refine_params = RefineParams {
        huber_delta: config.reloc.huber_delta,
        max_iterations: config.reloc.max_refine_iterations,
        ..RefineParams::default()
    };
    let mut out = Vec::new();
    for frame in frames {
        let mut observations: Vec<ObservationEllipse> = Vec::new();
        for det in &frame.detections {
            let det = if config.reloc.bbox_only {
                let mut d = det.clone();
                d.mask = None;
                d
            } else {
                det.clone()
            };
            if let Ok(obs) = observation_ellipse(&det) {
                observations.push(obs);
            }
        }
        let initial =
            correspondence_search(&observations, &ellipsoids, k, config.reloc.max_triplets);
        let result = if initial.status == RelocStatus::Ok {
            refine_pose(&initial, &observations, &ellipsoids, k, &refine_params)
        } else {
            initial
        };
        out.push(RelocRecord::from_result(frame.timestamp, &result));
    }
    Ok(out)
}

/// Per-frame evaluation entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameEval {
    pub timestamp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_error_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_error_deg: Option<f64>,
    pub valid: bool,
}

/// Aggregated relocalization quality report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames: Vec<FrameEval>,
    /// Median over valid frames; absent when no frame is valid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_position_error_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_rotation_error_deg: Option<f64>,
    /// Valid frames / total queries, percent.
    pub valid_ratio_percent: f64,
}

/// Validity thresholds: 30 cm and 30 degrees.
pub const VALID_POSITION_CM: f64 = 30.0;
pub const VALID_ROTATION_DEG: f64 = 30.0;

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Compare relocalization results with ground-truth poses matched by
/// timestamp. Position error is the camera-center distance; rotation
/// error the relative rotation angle. A frame is valid iff both are
/// under the 30 cm / 30° thresholds; no-solution frames count invalid.
pub fn evaluate(
    results: &[RelocRecord],
    groundtruth: &[(f64, Pose)],
) -> Result<EvalReport, PipelineError> {
    let mut frames = Vec::new();
    for r in results {
        let gt = groundtruth
            .iter()
            .find(|(t, _)| (t - r.timestamp).abs() < 1e-6)
            .map(|(_, p)| p)
            .ok_or_else(|| {
                PipelineError::Format(format!(
                    "no ground-truth pose for timestamp {:.6}",
                    r.timestamp
                ))
            })?;
        let entry = match r.pose() {
            Some(est) => {
                let pos_cm = (est.camera_center() - gt.camera_center()).norm() * 100.0;
                let rot_deg = est.rotation_angle_to(gt).to_degrees();
                FrameEval {
                    timestamp: r.timestamp,
                    position_error_cm: Some(pos_cm),
                    rotation_error_deg: Some(rot_deg),
                    valid: pos_cm < VALID_POSITION_CM && rot_deg < VALID_ROTATION_DEG,
                }
            }
            None => FrameEval {
                timestamp: r.timestamp,
                position_error_cm: None,
                rotation_error_deg: None,
                valid: false,
            },
        };
        frames.push(entry);
    }
    let valid: Vec<&FrameEval> = frames.iter().filter(|f| f.valid).collect();
    let report = EvalReport {
        median_position_error_cm: median(
            valid.iter().filter_map(|f| f.position_error_cm).collect(),
        ),
        median_rotation_error_deg: median(
            valid.iter().filter_map(|f| f.rotation_error_deg).collect(),
        ),
        valid_ratio_percent: if frames.is_empty() {
            0.0
        } else {
            100.0 * valid.len() as f64 / frames.len() as f64
        },
        frames,
    };
    Ok(report)
}

impl EvalReport {
    /// Human-readable summary table.
    pub fn table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("   n/a".to_string(), |x| format!("{x:6.2}"));
        let mut s = String::new();
        s.push_str("pos.err. (cm) | rot.err. (deg) | valid (%)\n");
        s.push_str("--------------+----------------+----------\n");
        s.push_str(&format!(
            "{:>13} | {:>14} | {:>8.1}\n",
            fmt(self.median_position_error_cm),
            fmt(self.median_rotation_error_deg),
            self.valid_ratio_percent
        ));
        s
    }
}
