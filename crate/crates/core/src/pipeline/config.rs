//! Run configuration: a single TOML document with namespaced keys for
//! every constant of the mapping, tracking and relocalization stages,
//! plus the synthetic-scene description consumed by `simulate`.

use serde::{Deserialize, Serialize};

use crate::sim::{NoiseSpec, SceneObject};

use super::PipelineError;

/// Voxel mapping stage constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct MappingConfig {
    /// Voxel edge length, meters.
    pub resolution: f64,
    pub hit_prob: f64,
    pub miss_prob: f64,
    pub class_prior: f64,
    /// Voxels below this label probability are removed.
    pub filter_threshold: f64,
    /// Minimum tracked frames before an instance joins the map (ω₀).
    pub promotion_min_tracks: u32,
    /// Mutual nearest-voxel overlap fraction for 3D instance matching.
    pub match_xi: f64,
    /// Nearest-voxel radius as a multiple of the resolution.
    pub match_radius_factor: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            resolution: 0.02,
            hit_prob: 0.7,
            miss_prob: 0.4,
            class_prior: 0.5,
            filter_threshold: 0.6,
            promotion_min_tracks: 3,
            match_xi: 0.5,
            match_radius_factor: 2.0,
        }
    }
}

/// 2D tracking / association constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackingConfig {
    /// Weight of the semantic mismatch term.
    pub lambda1: f64,
    /// Weight of the (1 - IoU) term.
    pub lambda2: f64,
    /// Assignment gate; pairs at or above this cost stay unmatched.
    pub gate: f64,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            lambda1: 1e6,
            lambda2: 1.0,
            gate: 5e5,
        }
    }
}

/// Relocalization constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct RelocConfig {
    /// Area-normalized squared-W2 inlier threshold.
    pub tau_inlier: f64,
    /// Huber threshold of the robust refinement kernel.
    pub huber_delta: f64,
    /// Cap on evaluated correspondence triplets per query.
    pub max_triplets: usize,
    /// Maximum refinement iterations.
    pub max_refine_iterations: usize,
    /// Baseline mode: ignore masks and use bbox-inscribed ellipses
    /// for every observation.
    pub bbox_only: bool,
}

impl Default for RelocConfig {
    fn default() -> Self {
        Self {
            tau_inlier: 1.0,
            huber_delta: 2.0,
            max_triplets: 5000,
            max_refine_iterations: 100,
            bbox_only: false,
        }
    }
}

/// Complete pipeline configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub mapping: MappingConfig,
    pub tracking: TrackingConfig,
    pub reloc: RelocConfig,
    /// Optional synthetic scene; required only by `simulate`.
    pub scene: Option<SceneConfig>,
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self, PipelineError> {
        toml::from_str(s).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String, PipelineError> {
        toml::to_string_pretty(self).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PipelineError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }
}

/// Pinhole camera parameters as written in config/calib files.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> Result<crate::geometry::CameraIntrinsics, PipelineError> {
        crate::geometry::CameraIntrinsics::new(
            self.fx, self.fy, self.cx, self.cy, self.width, self.height,
        )
        .map_err(|e| PipelineError::Config(e.to_string()))
    }
}

/// Trajectory recipe in configuration form.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrajectoryConfig {
    Orbit {
        center: [f64; 3],
        radius: f64,
        height: f64,
        steps: usize,
    },
    Arc {
        center: [f64; 3],
        radius: f64,
        height: f64,
        start_angle_deg: f64,
        end_angle_deg: f64,
        steps: usize,
    },
    /// An orbit replayed after rotating every viewpoint about the
    /// scene center.
    OffsetReplay {
        center: [f64; 3],
        radius: f64,
        height: f64,
        steps: usize,
        offset_deg: f64,
    },
}

impl TrajectoryConfig {
    pub fn to_spec(&self) -> crate::sim::TrajectorySpec {
        use crate::sim::TrajectorySpec as T;
        use nalgebra::Vector3;
        match *self {
            TrajectoryConfig::Orbit { center, radius, height, steps } => T::Orbit {
                center: Vector3::from(center),
                radius,
                height,
                steps,
            },
            TrajectoryConfig::Arc {
                center,
                radius,
                height,
                start_angle_deg,
                end_angle_deg,
                steps,
            } => T::Arc {
                center: Vector3::from(center),
                radius,
                height,
                start_angle: start_angle_deg.to_radians(),
                end_angle: end_angle_deg.to_radians(),
                steps,
            },
            TrajectoryConfig::OffsetReplay { center, radius, height, steps, offset_deg } => {
                let base = crate::sim::generate_trajectory(&T::Orbit {
                    center: Vector3::from(center),
                    radius,
                    height,
                    steps,
                })
                .unwrap_or_default();
                T::OffsetReplay {
                    base,
                    center: Vector3::from(center),
                    offset_angle: offset_deg.to_radians(),
                }
            }
        }
    }
}

/// Synthetic scene description for the `simulate` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneConfig {
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub camera: CameraConfig,
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub seed: u64,
    /// Frame rate used to derive timestamps, Hz.
    #[serde(default = "default_fps")]
    pub fps: f64,
}

fn default_fps() -> f64 {
    10.0
}

impl SceneConfig {
    pub fn to_scene(&self) -> Result<crate::sim::SceneSpec, PipelineError> {
        let camera = self.camera.intrinsics()?;
        let poses = crate::sim::generate_trajectory(&self.trajectory.to_spec())
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let dt = 1.0 / self.fps;
        let scene = crate::sim::SceneSpec {
            objects: self.objects.clone(),
            camera,
            trajectory: poses
                .into_iter()
                .enumerate()
                .map(|(i, p)| (i as f64 * dt, p))
                .collect(),
            noise: self.noise,
            seed: self.seed,
        };
        scene.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(scene)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = Config::default();
        let s = c.to_toml_string().unwrap();
        let back = Config::from_toml_str(&s).unwrap();
        assert_eq!(back.mapping.resolution, 0.02);
        assert_eq!(back.mapping.promotion_min_tracks, 3);
        assert_eq!(back.tracking.lambda1, 1e6);
        assert_eq!(back.tracking.gate, 5e5);
        assert_eq!(back.reloc.tau_inlier, 1.0);
        assert_eq!(back.reloc.huber_delta, 2.0);
        assert!(!back.reloc.bbox_only);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let c = Config::from_toml_str("[mapping]\nresolution = 0.05\n").unwrap();
        assert_eq!(c.mapping.resolution, 0.05);
        assert_eq!(c.mapping.hit_prob, 0.7);
        assert_eq!(c.reloc.max_triplets, 5000);
    }

    #[test]
    fn scene_config_builds_a_valid_scene() {
        let toml = r#"
[scene]
seed = 7
objects = [
  { class_id = 1, center = [1.0, 0.0, 0.2], yaw = 0.3, size = [0.5, 0.3, 0.4] },
  { class_id = 2, center = [-1.0, 0.5, 0.2], yaw = 0.0, size = [0.6, 0.4, 0.4] },
]

[scene.trajectory]
kind = "orbit"
center = [0.0, 0.0, 0.2]
radius = 3.0
height = 1.5
steps = 12
"#;
        let c = Config::from_toml_str(toml).unwrap();
        let scene = c.scene.unwrap().to_scene().unwrap();
        assert_eq!(scene.trajectory.len(), 12);
        assert_eq!(scene.objects.len(), 2);
        assert_eq!(scene.seed, 7);
    }
}
