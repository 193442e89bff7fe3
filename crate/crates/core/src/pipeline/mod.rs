//! End-to-end batch pipeline: configuration, dataset I/O, the
//! persisted object-map format, and the mapping / relocalization /
//! evaluation stages that the command-line tool drives.

pub mod config;
pub mod dataset;
pub mod map_file;
pub mod run;

pub use config::{CameraConfig, Config, MappingConfig, RelocConfig, SceneConfig, TrackingConfig};
pub use dataset::{read_dataset, write_dataset, LoadedDataset, DEPTH_SCALE};
pub use map_file::{MapFile, MapObjectRecord, VoxelSidecar};
pub use run::{build_map, evaluate, relocalize, EvalReport, FrameEval, RelocRecord};

/// Pipeline-level failures.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    /// Malformed or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Filesystem failure, annotated with the offending path.
    #[error("io error: {0}")]
    Io(String),
    /// Structurally invalid data (file contents or stage inputs).
    #[error("format error: {0}")]
    Format(String),
}
