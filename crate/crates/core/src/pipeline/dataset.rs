//! On-disk dataset layout (TUM-compatible): 16-bit depth PNGs scaled
//! by 5000, per-frame detection JSON, `groundtruth.txt` with
//! camera-to-world quaternion poses, and a `calib.txt` intrinsics file.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{UnitQuaternion, Vector3};

use crate::frame::{DepthMap, Detection2D, Frame};
use crate::geometry::{CameraIntrinsics, Pose};

use super::PipelineError;

/// Depth encoding scale: stored u16 value = meters × 5000.
pub const DEPTH_SCALE: f64 = 5000.0;

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io(format!("{}: {e}", path.display()))
}

/// Timestamps double as file names; fixed six-decimal seconds.
pub fn timestamp_name(t: f64) -> String {
    format!("{t:.6}")
}

pub fn write_depth_png(path: &Path, depth: &DepthMap) -> Result<(), PipelineError> {
    let mut img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(depth.width, depth.height);
    for (x, y, p) in img.enumerate_pixels_mut() {
        let v = (depth.get(x, y) as f64 * DEPTH_SCALE).round().clamp(0.0, u16::MAX as f64);
        *p = image::Luma([v as u16]);
    }
    img.save(path).map_err(|e| io_err(path, e))
}

pub fn read_depth_png(path: &Path) -> Result<DepthMap, PipelineError> {
    let img = image::open(path).map_err(|e| io_err(path, e))?.into_luma16();
    let (w, h) = img.dimensions();
    let data: Vec<f32> = img.pixels().map(|p| (p.0[0] as f64 / DEPTH_SCALE) as f32).collect();
    Ok(DepthMap::from_data(w, h, data))
}

pub fn write_calib(dir: &Path, k: &CameraIntrinsics) -> Result<(), PipelineError> {
    let path = dir.join("calib.txt");
    let s = format!("{} {} {} {} {} {}\n", k.fx, k.fy, k.cx, k.cy, k.width, k.height);
    fs::write(&path, s).map_err(|e| io_err(&path, e))
}

pub fn read_calib(dir: &Path) -> Result<CameraIntrinsics, PipelineError> {
    let path = dir.join("calib.txt");
    let s = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let parts: Vec<&str> = s.split_whitespace().collect();
    if parts.len() != 6 {
        return Err(PipelineError::Format(format!(
            "calib.txt: expected 6 fields, found {}",
            parts.len()
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| PipelineError::Format(format!("calib.txt: {e}")))?;
    CameraIntrinsics::new(nums[0], nums[1], nums[2], nums[3], nums[4] as u32, nums[5] as u32)
        .map_err(|e| PipelineError::Format(e.to_string()))
}

/// Write `groundtruth.txt`: one line `timestamp tx ty tz qx qy qz qw`
/// per frame, camera-to-world (TUM convention).
pub fn write_groundtruth(dir: &Path, poses: &[(f64, Pose)]) -> Result<(), PipelineError> {
    let path = dir.join("groundtruth.txt");
    let mut out = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for (t, pose) in poses {
        let c = pose.camera_center();
        let q = pose.inverse().to_unit_quaternion();
        out.push_str(&format!(
            "{} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9} {:.9}\n",
            timestamp_name(*t),
            c.x,
            c.y,
            c.z,
            q.i,
            q.j,
            q.k,
            q.w
        ));
    }
    fs::write(&path, out).map_err(|e| io_err(&path, e))
}

pub fn read_groundtruth(dir: &Path) -> Result<Vec<(f64, Pose)>, PipelineError> {
    let path = dir.join("groundtruth.txt");
    let s = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let mut out = Vec::new();
    for (ln, line) in s.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|p| p.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| PipelineError::Format(format!("groundtruth.txt:{}: {e}", ln + 1)))?;
        if nums.len() != 8 {
            return Err(PipelineError::Format(format!(
                "groundtruth.txt:{}: expected 8 fields",
                ln + 1
            )));
        }
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            nums[7], nums[4], nums[5], nums[6],
        ));
        // Line holds camera-to-world; convert to world-to-camera.
        let rot_c2w = q.to_rotation_matrix();
        let center = Vector3::new(nums[1], nums[2], nums[3]);
        let rot = rot_c2w.inverse();
        let pose = Pose::from_parts(rot, -(rot * center));
        out.push((nums[0], pose));
    }
    Ok(out)
}

fn write_detections(path: &Path, detections: &[Detection2D]) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(detections).map_err(|e| io_err(path, e))?;
    fs::write(path, json).map_err(|e| io_err(path, e))
}

fn read_detections(path: &Path) -> Result<Vec<Detection2D>, PipelineError> {
    let s = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&s).map_err(|e| io_err(path, e))
}

/// Write a complete dataset: depth, detections, calibration and ground
/// truth for every frame.
pub fn write_dataset(
    dir: &Path,
    k: &CameraIntrinsics,
    frames: &[Frame],
) -> Result<(), PipelineError> {
    let depth_dir = dir.join("depth");
    let det_dir = dir.join("detections");
    fs::create_dir_all(&depth_dir).map_err(|e| io_err(&depth_dir, e))?;
    fs::create_dir_all(&det_dir).map_err(|e| io_err(&det_dir, e))?;
    write_calib(dir, k)?;
    let mut gt = Vec::new();
    for f in frames {
        let name = timestamp_name(f.timestamp);
        write_depth_png(&depth_dir.join(format!("{name}.png")), &f.depth)?;
        write_detections(&det_dir.join(format!("{name}.json")), &f.detections)?;
        if let Some(p) = f.pose {
            gt.push((f.timestamp, p));
        }
    }
    if !gt.is_empty() {
        write_groundtruth(dir, &gt)?;
    }
    Ok(())
}

/// A dataset loaded back into memory. `frames[i].pose` carries the
/// ground-truth pose when `groundtruth.txt` is present.
pub struct LoadedDataset {
    pub camera: CameraIntrinsics,
    pub frames: Vec<Frame>,
}

pub fn read_dataset(dir: &Path) -> Result<LoadedDataset, PipelineError> {
    let camera = read_calib(dir)?;
    let det_dir = dir.join("detections");
    let depth_dir = dir.join("depth");
    let mut stamps: Vec<(f64, PathBuf)> = Vec::new();
    let entries = fs::read_dir(&det_dir).map_err(|e| io_err(&det_dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| io_err(&det_dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| PipelineError::Format(format!("bad file name {}", path.display())))?;
        let t: f64 = stem
            .parse()
            .map_err(|e| PipelineError::Format(format!("{}: {e}", path.display())))?;
        stamps.push((t, path));
    }
    stamps.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite timestamps"));
    let gt = read_groundtruth(dir).ok();
    let mut frames = Vec::new();
    for (t, det_path) in stamps {
        let name = timestamp_name(t);
        let depth_path = depth_dir.join(format!("{name}.png"));
        let depth = if depth_path.exists() {
            read_depth_png(&depth_path)?
        } else {
            DepthMap::new(camera.width, camera.height)
        };
        let detections = read_detections(&det_path)?;
        let pose = gt.as_ref().and_then(|g| {
            g.iter()
                .find(|(gt_t, _)| (gt_t - t).abs() < 1e-6)
                .map(|(_, p)| *p)
        });
        frames.push(Frame {
            timestamp: t,
            depth,
            detections,
            pose,
        });
    }
    if frames.is_empty() {
        return Err(PipelineError::Format(format!(
            "dataset {} contains no frames",
            dir.display()
        )));
    }
    Ok(LoadedDataset { camera, frames })
}
