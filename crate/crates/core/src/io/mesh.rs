use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::color::ColormapConfig;
use crate::error::{Error, Result};
use crate::tube::{RadiusConvention, TubeMesh};
use crate::uq::UqMethod;

pub const MESH_VERSION: u32 = 1;

/// Everything needed to regenerate the meshes of a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshMeta {
    pub method: UqMethod,
    pub tau: f64,
    pub m: usize,
    pub radius_convention: RadiusConvention,
    pub colormap: ColormapConfig,
    /// Ceiling actually used for coloring.
    pub magnitude_ceiling: f64,
    pub n_samples: usize,
    pub n_steps: usize,
    pub rng_seed: u64,
    /// Coordinates are in original domain units.
    pub frame: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub magnitude: Vec<f32>,
    pub symmetry: Vec<f32>,
}

/// One tube in wire format: flat `f32` arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshRecord {
    pub seed: [f32; 3],
    pub rings: usize,
    pub ring_stride: usize,
    pub vertices: Vec<f32>,
    pub normals: Vec<f32>,
    pub uvs: Vec<f32>,
    pub colors: Vec<f32>,
    pub indices: Vec<u32>,
    pub stats: MeshStats,
}

impl MeshRecord {
    pub fn from_mesh(m: &TubeMesh) -> Self {
        let flat3 = |v: &[glam::DVec3]| -> Vec<f32> {
            v.iter()
                .flat_map(|p| [p.x as f32, p.y as f32, p.z as f32])
                .collect()
        };
        Self {
            seed: [m.seed.x as f32, m.seed.y as f32, m.seed.z as f32],
            rings: m.rings,
            ring_stride: m.ring_stride,
            vertices: flat3(&m.vertices),
            normals: flat3(&m.normals),
            uvs: m
                .uvs
                .iter()
                .flat_map(|u| [u[0] as f32, u[1] as f32])
                .collect(),
            colors: m.colors.iter().flatten().copied().collect(),
            indices: m.indices.clone(),
            stats: MeshStats {
                magnitude: m.stats.magnitude.iter().map(|&v| v as f32).collect(),
                symmetry: m.stats.symmetry.iter().map(|&v| v as f32).collect(),
            },
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len() / 3
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.vertex_count();
        if self.vertices.len() != 3 * v
            || self.normals.len() != 3 * v
            || self.uvs.len() != 2 * v
            || self.colors.len() != 4 * v
        {
            return Err(Error::format(
                "mesh attribute arrays disagree on the vertex count",
            ));
        }
        if !self.indices.len().is_multiple_of(3) {
            return Err(Error::format("index count is not a multiple of 3"));
        }
        if let Some(bad) = self.indices.iter().find(|&&i| i as usize >= v) {
            return Err(Error::format(format!(
                "index {bad} out of range for {v} vertices"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDocument {
    pub version: u32,
    pub meta: MeshMeta,
    pub meshes: Vec<MeshRecord>,
}

impl MeshDocument {
    pub fn new(meta: MeshMeta, meshes: &[TubeMesh]) -> Self {
        Self {
            version: MESH_VERSION,
            meta,
            meshes: meshes.iter().map(MeshRecord::from_mesh).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.version == 0 || doc.version > MESH_VERSION {
            return Err(Error::format(format!(
                "unsupported mesh document version {} (this build reads versions 1 to {MESH_VERSION})",
                doc.version
            )));
        }
        for (i, m) in doc.meshes.iter().enumerate() {
            m.validate()
                .map_err(|e| Error::format(format!("mesh {i}: {e}")))?;
        }
        Ok(doc)
    }
}

pub fn export_mesh_json(doc: &MeshDocument, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, doc.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_mesh_json(path: impl AsRef<Path>) -> Result<MeshDocument> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MeshDocument::from_json(&text)
}

/// OBJ text with `v x y z r g b` vertex colors, one object per tube and 1-based
/// `v/vt/vn` face indices.
pub fn obj_string(doc: &MeshDocument) -> String {
    let mut s = String::new();
    let mut base = 1usize;
    for (i, m) in doc.meshes.iter().enumerate() {
        let _ = writeln!(s, "o tube_{i}");
        let n = m.vertex_count();
        for k in 0..n {
            let p = &m.vertices[3 * k..3 * k + 3];
            let c = &m.colors[4 * k..4 * k + 3];
            let _ = writeln!(s, "v {} {} {} {} {} {}", p[0], p[1], p[2], c[0], c[1], c[2]);
        }
        for k in 0..n {
            let _ = writeln!(s, "vt {} {}", m.uvs[2 * k], m.uvs[2 * k + 1]);
        }
        for k in 0..n {
            let q = &m.normals[3 * k..3 * k + 3];
            let _ = writeln!(s, "vn {} {} {}", q[0], q[1], q[2]);
        }
        for tri in m.indices.chunks_exact(3) {
            let [a, b, c] = [0, 1, 2].map(|j| tri[j] as usize + base);
            let _ = writeln!(s, "f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}");
        }
        base += n;
    }
    s
}

pub fn export_obj(doc: &MeshDocument, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, obj_string(doc)).map_err(|e| Error::io(path, e))
}
