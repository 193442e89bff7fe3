//! Shared frame-level data: depth maps, 2D detections and bounding
//! boxes.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::geometry::Pose;

/// Axis-aligned bounding box `(x, y, w, h)` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self {
            x: x1.min(x2),
            y: y1.min(y2),
            w: (x2 - x1).abs(),
            h: (y2 - y1).abs(),
        }
    }

    /// Tight box around a point set; `None` on an empty set.
    pub fn from_points(points: &[Vector2<f64>]) -> Option<Self> {
        let first = points.first()?;
        let (mut x1, mut y1, mut x2, mut y2) = (first.x, first.y, first.x, first.y);
        for p in points {
            x1 = x1.min(p.x);
            y1 = y1.min(p.y);
            x2 = x2.max(p.x);
            y2 = y2.max(p.y);
        }
        Some(Self::from_corners(x1, y1, x2, y2))
    }

    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    pub fn area(&self) -> f64 {
        (self.w.max(0.0)) * (self.h.max(0.0))
    }

    /// Intersection-over-union; 0 for disjoint boxes.
    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn clamp_to(&self, width: u32, height: u32) -> Self {
        let x1 = self.x.clamp(0.0, width as f64);
        let y1 = self.y.clamp(0.0, height as f64);
        let x2 = (self.x + self.w).clamp(0.0, width as f64);
        let y2 = (self.y + self.h).clamp(0.0, height as f64);
        Self::from_corners(x1, y1, x2, y2)
    }
}

/// One 2D instance detection: class, confidence, box and an optional
/// segmentation mask polygon (pixel coordinates, sub-pixel precision).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection2D {
    pub class_id: i32,
    pub score: f64,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<[f64; 2]>>,
}

impl Detection2D {
    pub fn mask_points(&self) -> Option<Vec<Vector2<f64>>> {
        self.mask
            .as_ref()
            .map(|m| m.iter().map(|p| Vector2::new(p[0], p[1])).collect())
    }
}

/// Dense depth image in meters; 0 marks invalid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    data: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; (width * height) as usize],
        }
    }

    pub fn from_data(width: u32, height: u32, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), (width * height) as usize);
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, depth: f32) {
        self.data[(y * self.width + x) as usize] = depth;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn is_empty_depth(&self) -> bool {
        self.data.iter().all(|&d| d <= 0.0)
    }
}

/// A single RGBD frame with detections and (for mapping) a known pose.
#[derive(Debug, Clone)]
pub struct Frame {
    pub timestamp: f64,
    pub depth: DepthMap,
    pub detections: Vec<Detection2D>,
    /// Ground-truth or SLAM-provided world-to-camera pose; absent on
    /// pure query frames.
    pub pose: Option<Pose>,
}
