//! Object-level semantic mapping with ellipsoidal landmarks and
//! object-based camera relocalization.
//!
//! The crate is organized around a batch pipeline:
//!
//! - [`geometry`]: dual quadrics/conics, SE(3) poses, pinhole cameras,
//!   ellipse fitting and the Wasserstein-2 residual.
//! - [`voxel`]: per-object probabilistic voxel models fused from depth
//!   maps and instance masks.
//! - [`tracking`]: 2D detection-to-object association (Hungarian) and
//!   3D duplicate-object matching.
//! - [`ellipsoid_gen`]: voxel model to oriented cuboid to inscribed
//!   ellipsoid conversion (ground-plane PCA yaw).
//! - [`reloc`]: observation-ellipse extraction, P3P-loop correspondence
//!   search and robust Wasserstein pose refinement.
//! - [`sim`]: fully ground-truthed synthetic RGBD scene renderer used as
//!   the verification oracle.
//! - [`pipeline`]: dataset I/O, map persistence, batch orchestration and
//!   evaluation metrics.

pub mod ellipsoid_gen;
pub mod frame;
pub mod geometry;
pub mod pipeline;
pub mod polygon;
pub mod reloc;
pub mod sim;
pub mod tracking;
pub mod voxel;

pub use frame::{BBox, DepthMap, Detection2D, Frame};
pub use geometry::{CameraIntrinsics, Ellipse, Ellipsoid, Pose};
