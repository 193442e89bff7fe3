//! Per-object probabilistic voxel models.
//!
//! Each object carries a sparse grid of voxels storing the semantic
//! label probability of the object's class, fused over keyframes with
//! the recursive Bayesian update of occupancy-grid mapping. A single
//! writer owns each model; distinct models may be integrated
//! concurrently.

use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::Frame;
use crate::geometry::{CameraIntrinsics, Pose};
use crate::polygon;

pub const PROB_MIN: f64 = 0.001;
pub const PROB_MAX: f64 = 0.999;

#[derive(Debug, Clone, Error)]
pub enum VoxelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("integration failed: {0}")]
    Integration(String),
}

/// Integer voxel grid index. The grid resolution (meters per voxel) is
/// a model-level constant; a voxel center sits at
/// `(ix + 0.5, iy + 0.5, iz + 0.5) * resolution`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelKey {
    pub ix: i32,
    pub iy: i32,
    pub iz: i32,
}

impl VoxelKey {
    pub fn from_world(p: &Vector3<f64>, resolution: f64) -> Self {
        Self {
            ix: (p.x / resolution).floor() as i32,
            iy: (p.y / resolution).floor() as i32,
            iz: (p.z / resolution).floor() as i32,
        }
    }

    pub fn center(&self, resolution: f64) -> Vector3<f64> {
        Vector3::new(
            (self.ix as f64 + 0.5) * resolution,
            (self.iy as f64 + 0.5) * resolution,
            (self.iz as f64 + 0.5) * resolution,
        )
    }
}

/// Per-voxel semantic state for the owning object's class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticVoxel {
    /// Probability that this voxel belongs to the object's class,
    /// clamped to `[0.001, 0.999]`.
    pub label_prob: f64,
    pub hit_count: u32,
}

/// Recursive semantic label update: combines a prior, a new observation
/// and the static class prior in odds form, clamped to
/// `[0.001, 0.999]`. With a uniform class prior this is exactly
/// log-odds addition.
pub fn update_label_probability(
    prior: f64,
    observation: f64,
    class_prior: f64,
) -> Result<f64, VoxelError> {
    for (name, v) in [
        ("prior", prior),
        ("observation", observation),
        ("class_prior", class_prior),
    ] {
        if !(v > 0.0 && v < 1.0) {
            return Err(VoxelError::InvalidArgument(format!(
                "{name} must be in (0,1), got {v}"
            )));
        }
    }
    let odds = ((1.0 - observation) / observation)
        * ((1.0 - prior) / prior)
        * (class_prior / (1.0 - class_prior));
    Ok((1.0 / (1.0 + odds)).clamp(PROB_MIN, PROB_MAX))
}

/// Fusion constants for [`ObjectInstanceModel::integrate_observation`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegrationParams {
    /// Observation probability for a voxel hit by a masked depth pixel.
    pub hit_prob: f64,
    /// Observation probability for a model voxel that should have been
    /// seen but was not.
    pub miss_prob: f64,
    /// Static class prior P(c_i, n).
    pub class_prior: f64,
}

impl Default for IntegrationParams {
    fn default() -> Self {
        Self {
            hit_prob: 0.7,
            miss_prob: 0.4,
            class_prior: 0.5,
        }
    }
}

/// Voxel model of a single object instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectInstanceModel {
    pub object_id: u64,
    pub class_id: i32,
    pub resolution: f64,
    pub voxels: HashMap<VoxelKey, SemanticVoxel>,
    /// How many frames the 2D tracker has associated to this object.
    pub times_tracked: u32,
    pub promoted: bool,
    /// Accumulated per-class evidence used to fix the final label.
    pub class_votes: BTreeMap<i32, f64>,
}

impl ObjectInstanceModel {
    pub fn new(object_id: u64, class_id: i32, resolution: f64) -> Self {
        Self {
            object_id,
            class_id,
            resolution,
            voxels: HashMap::new(),
            times_tracked: 0,
            promoted: false,
            class_votes: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn voxel_centers(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.voxels.keys().map(|k| k.center(self.resolution))
    }

    pub fn record_class_observation(&mut self, class_id: i32, weight: f64) {
        *self.class_votes.entry(class_id).or_insert(0.0) += weight;
    }

    /// Class with the maximum accumulated evidence (ties broken by the
    /// smaller id); falls back to the creation class.
    pub fn final_label(&self) -> i32 {
        self.class_votes
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(c, _)| *c)
            .unwrap_or(self.class_id)
    }

    /// Fuse one frame's masked depth observation into the model.
    ///
    /// Every valid depth pixel inside the mask back-projects to a world
    /// point whose voxel receives a hit update. Model voxels that
    /// project into the mask's bounding box without being hit receive a
    /// miss update, but only when the measured depth at that pixel
    /// proves they were actually observable (voxel depth not beyond the
    /// measured surface); occluded voxels are left untouched.
    pub fn integrate_observation(
        &mut self,
        frame: &Frame,
        mask: &[Vector2<f64>],
        pose: &Pose,
        k: &CameraIntrinsics,
        params: &IntegrationParams,
    ) -> Result<(), VoxelError> {
        if frame.depth.is_empty_depth() {
            return Err(VoxelError::Integration("frame has no valid depth".into()));
        }
        if mask.len() < 3 {
            return Err(VoxelError::Integration("mask polygon is degenerate".into()));
        }
        let cam_to_world = pose.inverse();
        let mut hit_keys: HashSet<VoxelKey> = HashSet::new();
        for (x, y) in polygon::rasterize(mask, k.width, k.height) {
            let d = frame.depth.get(x, y) as f64;
            if d <= 0.0 {
                continue;
            }
            let px = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
            let world = cam_to_world.transform_point(&k.backproject(&px, d));
            let key = VoxelKey::from_world(&world, self.resolution);
            let voxel = self.voxels.entry(key).or_insert(SemanticVoxel {
                label_prob: params.class_prior,
                hit_count: 0,
            });
            voxel.label_prob =
                update_label_probability(voxel.label_prob, params.hit_prob, params.class_prior)?;
            voxel.hit_count += 1;
            hit_keys.insert(key);
        }

        let bbox = match crate::frame::BBox::from_points(mask) {
            Some(b) => b.clamp_to(k.width, k.height),
            None => return Ok(()),
        };
        let margin = self.resolution;
        let keys: Vec<VoxelKey> = self.voxels.keys().copied().collect();
        for key in keys {
            if hit_keys.contains(&key) {
                continue;
            }
            let cam = pose.transform_point(&key.center(self.resolution));
            let Some(px) = k.project(&cam) else { continue };
            if px.x < bbox.x || px.x >= bbox.x + bbox.w || px.y < bbox.y || px.y >= bbox.y + bbox.h
            {
                continue;
            }
            let (xi, yi) = (px.x.floor() as u32, px.y.floor() as u32);
            if xi >= k.width || yi >= k.height {
                continue;
            }
            let measured = frame.depth.get(xi, yi) as f64;
            if measured <= 0.0 || cam.z > measured + margin {
                continue; // unknown or occluded
            }
            let voxel = self.voxels.get_mut(&key).unwrap();
            voxel.label_prob =
                update_label_probability(voxel.label_prob, params.miss_prob, params.class_prior)?;
        }
        Ok(())
    }

    /// Remove every voxel with `label_prob < threshold`. Idempotent at
    /// a fixed threshold.
    pub fn filter_voxels(&mut self, threshold: f64) {
        self.voxels.retain(|_, v| v.label_prob >= threshold);
    }

    /// Promote the model into the global map once it has been tracked
    /// at least `omega0` times; fixes the final semantic label.
    pub fn promote_if_ready(&mut self, omega0: u32) -> bool {
        if !self.promoted && self.times_tracked >= omega0 {
            self.promoted = true;
            self.class_id = self.final_label();
        }
        self.promoted
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn key_roundtrip_is_exact() {
        let res = 0.02;
        let key = VoxelKey {
            ix: -7,
            iy: 3,
            iz: 120,
        };
        assert_eq!(VoxelKey::from_world(&key.center(res), res), key);
    }

    #[test]
    fn update_examples() {
        // Uniform prior passes the observation through.
        assert_relative_eq!(
            update_label_probability(0.5, 0.7, 0.5).unwrap(),
            0.7,
            epsilon = 1e-14
        );
        // Log-odds cancellation.
        assert_relative_eq!(
            update_label_probability(0.7, 0.3, 0.5).unwrap(),
            0.5,
            epsilon = 1e-14
        );
        // Two agreeing observations reinforce: 49/58.
        assert_relative_eq!(
            update_label_probability(0.7, 0.7, 0.5).unwrap(),
            49.0 / 58.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn update_rejects_out_of_range() {
        assert!(update_label_probability(0.0, 0.5, 0.5).is_err());
        assert!(update_label_probability(0.5, 1.0, 0.5).is_err());
        assert!(update_label_probability(0.5, 0.5, -0.1).is_err());
    }

    #[test]
    fn update_matches_logodds_addition() {
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let expit = |l: f64| 1.0 / (1.0 + (-l).exp());
        for (prior, obs) in [(0.5, 0.6), (0.42, 0.55), (0.61, 0.38), (0.52, 0.52)] {
            let got = update_label_probability(prior, obs, 0.5).unwrap();
            assert_relative_eq!(got, expit(logit(prior) + logit(obs)), epsilon = 1e-12);
        }
    }

    #[test]
    fn update_is_order_invariant() {
        // Log-odds additivity: any permutation gives the same result,
        // as long as no intermediate value saturates the clamp.
        let obs = [0.6, 0.45, 0.55, 0.62, 0.4, 0.58, 0.51];
        let run = |seq: &[f64]| {
            seq.iter()
                .fold(0.5, |p, &o| update_label_probability(p, o, 0.5).unwrap())
        };
        let forward = run(&obs);
        let mut reversed = obs;
        reversed.reverse();
        assert_relative_eq!(forward, run(&reversed), epsilon = 1e-12);
    }

    #[test]
    fn filter_keeps_voxels_at_or_above_threshold() {
        let mut model = ObjectInstanceModel::new(0, 1, 0.02);
        for (i, p) in [0.9, 0.59, 0.61].into_iter().enumerate() {
            model.voxels.insert(
                VoxelKey {
                    ix: i as i32,
                    iy: 0,
                    iz: 0,
                },
                SemanticVoxel {
                    label_prob: p,
                    hit_count: 1,
                },
            );
        }
        model.filter_voxels(0.6);
        let mut probs: Vec<f64> = model.voxels.values().map(|v| v.label_prob).collect();
        probs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(probs, vec![0.61, 0.9]);
        // Idempotent.
        let before = model.voxels.clone();
        model.filter_voxels(0.6);
        assert_eq!(model.voxels, before);

        let mut empty = ObjectInstanceModel::new(1, 1, 0.02);
        empty.filter_voxels(0.6);
        assert!(empty.is_empty());
    }

    #[test]
    fn promotion_threshold_and_idempotence() {
        let mut model = ObjectInstanceModel::new(0, 3, 0.02);
        model.record_class_observation(3, 2.0);
        model.times_tracked = 2;
        assert!(!model.promote_if_ready(3));
        model.times_tracked = 3;
        assert!(model.promote_if_ready(3));
        model.times_tracked = 10;
        assert!(model.promote_if_ready(3));
        assert_eq!(model.class_id, 3);
    }
}
