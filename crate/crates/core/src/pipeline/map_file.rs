//! Persistent object map: ellipsoid parameters per object with an
//! optional per-object voxel sidecar, stored as JSON.

use std::fs;
use std::path::Path;

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::Ellipsoid;
use crate::voxel::ObjectInstanceModel;

use super::PipelineError;

/// Voxel occupancy dump for one object.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VoxelSidecar {
    pub resolution: f64,
    /// (ix, iy, iz, label_prob) per surviving voxel.
    pub entries: Vec<(i32, i32, i32, f64)>,
}

/// One object of the persisted map.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MapObjectRecord {
    pub id: u64,
    pub class_id: i32,
    pub center: [f64; 3],
    /// Unit quaternion (x, y, z, w).
    pub rotation: [f64; 4],
    pub semi_axes: [f64; 3],
    pub times_tracked: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voxels: Option<VoxelSidecar>,
}

impl MapObjectRecord {
    pub fn from_parts(
        id: u64,
        ellipsoid: &Ellipsoid,
        times_tracked: u32,
        model: Option<&ObjectInstanceModel>,
    ) -> Self {
        let q = UnitQuaternion::from_rotation_matrix(&ellipsoid.rotation);
        let voxels = model.map(|m| {
            let mut entries: Vec<(i32, i32, i32, f64)> = m
                .voxels
                .iter()
                .map(|(k, v)| (k.ix, k.iy, k.iz, v.label_prob))
                .collect();
            entries.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
            VoxelSidecar {
                resolution: m.resolution,
                entries,
            }
        });
        Self {
            id,
            class_id: ellipsoid.class_id,
            center: [ellipsoid.center.x, ellipsoid.center.y, ellipsoid.center.z],
            rotation: [q.i, q.j, q.k, q.w],
            semi_axes: [
                ellipsoid.semi_axes.x,
                ellipsoid.semi_axes.y,
                ellipsoid.semi_axes.z,
            ],
            times_tracked,
            voxels,
        }
    }

    pub fn ellipsoid(&self) -> Result<Ellipsoid, PipelineError> {
        let [x, y, z, w] = self.rotation;
        let q = Quaternion::new(w, x, y, z);
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(PipelineError::Format(format!(
                "object {}: quaternion norm {} is not 1",
                self.id,
                q.norm()
            )));
        }
        let rot: Rotation3<f64> = UnitQuaternion::from_quaternion(q).to_rotation_matrix();
        Ellipsoid::new(
            Vector3::from(self.center),
            rot,
            Vector3::from(self.semi_axes),
            self.class_id,
        )
        .map_err(|e| PipelineError::Format(e.to_string()))
    }
}

/// The persisted object map.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct MapFile {
    pub objects: Vec<MapObjectRecord>,
}

impl MapFile {
    pub fn to_json(&self) -> Result<String, PipelineError> {
        serde_json::to_string_pretty(self).map_err(|e| PipelineError::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(s).map_err(|e| PipelineError::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        fs::write(path, self.to_json()?)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let s = fs::read_to_string(path)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn ellipsoids(&self) -> Result<Vec<(u64, Ellipsoid)>, PipelineError> {
        self.objects
            .iter()
            .map(|o| o.ellipsoid().map(|e| (o.id, e)))
            .collect()
    }
}
