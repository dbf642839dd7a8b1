//! Mesh and sequence data model, graph topology utilities, and closed-surface
//! volume computation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};

/// Anatomical structure labels carried per vertex.
pub mod label {
    pub const LV: u8 = 0;
    pub const MYO: u8 = 1;
    pub const RV: u8 = 2;
    pub const ALL: [u8; 3] = [LV, MYO, RV];
    pub const NAMES: [&str; 3] = ["LV", "Myo", "RV"];

    pub fn name(l: u8) -> &'static str {
        NAMES[l as usize]
    }
}

/// A triangulated heart surface at one time frame.
///
/// Coordinates are millimetres. Faces are counter-clockwise when viewed from
/// outside the enclosed structure. Each label-induced sub-mesh (faces whose
/// three vertices share a label) must form a closed orientable surface.
#[derive(Clone, Debug, PartialEq)]
pub struct CardiacMesh {
    pub vertices: Vec<[f32; 3]>,
    pub faces: Vec<[u32; 3]>,
    pub vertex_labels: Vec<u8>,
}

/// Clinical covariates conditioning the generative model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClinicalConditions {
    pub age_years: f64,
    /// 0 = female, 1 = male.
    pub sex: u8,
    pub weight_kg: f64,
    pub height_cm: f64,
}

impl ClinicalConditions {
    pub fn validate(&self) -> CoreResult<()> {
        for (name, v) in [
            ("age_years", self.age_years),
            ("weight_kg", self.weight_kg),
            ("height_cm", self.height_cm),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(CoreError::Input(format!(
                    "condition `{name}` must be finite and > 0, got {v}"
                )));
            }
        }
        if self.sex > 1 {
            return Err(CoreError::Input(format!(
                "condition `sex` must be 0 or 1, got {}",
                self.sex
            )));
        }
        Ok(())
    }
}

/// A fixed-topology sequence of meshes over one cardiac cycle.
#[derive(Clone, Debug)]
pub struct MeshSequence {
    pub frames: Vec<CardiacMesh>,
    pub subject_id: String,
    pub conditions: ClinicalConditions,
}

impl CardiacMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Vertex coordinates widened to f64 for geometry kernels.
    pub fn vertices_f64(&self) -> Vec<[f64; 3]> {
        self.vertices
            .iter()
            .map(|v| [v[0] as f64, v[1] as f64, v[2] as f64])
            .collect()
    }

    /// Faces whose three vertices all carry `label`.
    pub fn structure_faces(&self, label: u8) -> Vec<[u32; 3]> {
        self.faces
            .iter()
            .filter(|f| f.iter().all(|&i| self.vertex_labels[i as usize] == label))
            .copied()
            .collect()
    }

    /// Indices of vertices carrying `label`.
    pub fn structure_vertex_indices(&self, label: u8) -> Vec<usize> {
        self.vertex_labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// Signed volume (mm^3) of the sub-mesh induced by `label`.
    pub fn structure_volume(&self, label: u8) -> CoreResult<f64> {
        let faces = self.structure_faces(label);
        closed_surface_volume(&self.vertices_f64(), &faces)
    }

    /// Checks the full data-model invariants: index ranges, face
    /// non-degeneracy, finite coordinates, label validity, and per-structure
    /// closedness/orientability.
    pub fn validate(&self) -> CoreResult<()> {
        let v = self.vertices.len() as u32;
        if self.vertex_labels.len() != self.vertices.len() {
            return Err(CoreError::Shape(format!(
                "vertex_labels length {} != vertex count {}",
                self.vertex_labels.len(),
                self.vertices.len()
            )));
        }
        for (fi, f) in self.faces.iter().enumerate() {
            for &i in f {
                if i >= v {
                    return Err(CoreError::Topology(format!(
                        "face {fi} references vertex {i} but mesh has {v} vertices"
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(CoreError::Topology(format!(
                    "face {fi} has repeated vertex indices {f:?}"
                )));
            }
        }
        for (vi, p) in self.vertices.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(CoreError::Input(format!(
                    "vertex {vi} has non-finite coordinates {p:?}"
                )));
            }
        }
        for &l in &self.vertex_labels {
            if l > label::RV {
                return Err(CoreError::Input(format!("unknown vertex label {l}")));
            }
        }
        for &l in &label::ALL {
            let faces = self.structure_faces(l);
            if !faces.is_empty() {
                check_closed(&faces).map_err(|e| {
                    CoreError::Topology(format!("structure {}: {e}", label::name(l)))
                })?;
            }
        }
        Ok(())
    }
}

impl MeshSequence {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Validates every frame plus the sequence-level invariants: T >= 2 and
    /// identical faces/labels across frames.
    pub fn validate(&self) -> CoreResult<()> {
        if self.frames.len() < 2 {
            return Err(CoreError::Shape(format!(
                "sequence needs at least 2 frames, got {}",
                self.frames.len()
            )));
        }
        self.conditions.validate()?;
        let first = &self.frames[0];
        for (t, frame) in self.frames.iter().enumerate() {
            if frame.faces != first.faces || frame.vertex_labels != first.vertex_labels {
                return Err(CoreError::Topology(format!(
                    "frame {t} does not share the topology of frame 0"
                )));
            }
            frame.validate()?;
        }
        Ok(())
    }
}

/// Builds symmetric neighbor lists from triangle faces.
///
/// `j in neighbors(i)` iff some face contains both `i` and `j`; each list is
/// sorted and duplicate-free, with no self-loops.
pub fn build_adjacency(faces: &[[u32; 3]], vertex_count: usize) -> CoreResult<Vec<Vec<u32>>> {
    let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); vertex_count];
    for (fi, f) in faces.iter().enumerate() {
        for &i in f {
            if i as usize >= vertex_count {
                return Err(CoreError::Topology(format!(
                    "face {fi} references vertex {i} but mesh has {vertex_count} vertices"
                )));
            }
        }
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            if a != b {
                neighbors[a as usize].push(b);
                neighbors[b as usize].push(a);
            }
        }
    }
    for list in &mut neighbors {
        list.sort_unstable();
        list.dedup();
    }
    Ok(neighbors)
}

/// Verifies that `faces` form a closed orientable surface: every undirected
/// edge appears in exactly two faces, once per direction.
pub fn check_closed(faces: &[[u32; 3]]) -> CoreResult<()> {
    // (min, max, direction): +1 if the directed edge goes low->high
    let mut edges: Vec<(u32, u32, i8)> = Vec::with_capacity(faces.len() * 3);
    for f in faces {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            let (lo, hi, dir) = if a < b { (a, b, 1i8) } else { (b, a, -1i8) };
            edges.push((lo, hi, dir));
        }
    }
    edges.sort_unstable();
    let mut i = 0;
    while i < edges.len() {
        let (lo, hi, _) = edges[i];
        let mut j = i;
        let mut dir_sum: i32 = 0;
        while j < edges.len() && edges[j].0 == lo && edges[j].1 == hi {
            dir_sum += edges[j].2 as i32;
            j += 1;
        }
        let count = j - i;
        if count != 2 || dir_sum != 0 {
            return Err(CoreError::Topology(format!(
                "edge ({lo}, {hi}) appears in {count} face(s) with orientation sum {dir_sum}; \
                 surface is not closed and consistently oriented"
            )));
        }
        i = j;
    }
    Ok(())
}

/// Signed volume (mm^3) enclosed by a closed oriented triangle surface via
/// the divergence theorem: (1/6) * sum of det[a, b, c] over faces.
///
/// The vertex centroid is subtracted before summation so the result is
/// translation-invariant at floating-point level. Positive for consistently
/// outward-oriented surfaces. Returns a topology error naming the first bad
/// edge if the surface is open or inconsistently oriented.
pub fn closed_surface_volume(vertices: &[[f64; 3]], faces: &[[u32; 3]]) -> CoreResult<f64> {
    check_closed(faces)?;
    if faces.is_empty() {
        return Ok(0.0);
    }
    // centroid of the vertices actually used by the faces
    let mut used = vec![false; vertices.len()];
    for f in faces {
        for &i in f {
            if i as usize >= vertices.len() {
                return Err(CoreError::Topology(format!(
                    "face references vertex {i} but only {} vertices given",
                    vertices.len()
                )));
            }
            used[i as usize] = true;
        }
    }
    let mut centroid = [0.0f64; 3];
    let mut n_used = 0usize;
    for (i, &u) in used.iter().enumerate() {
        if u {
            for k in 0..3 {
                centroid[k] += vertices[i][k];
            }
            n_used += 1;
        }
    }
    for c in &mut centroid {
        *c /= n_used as f64;
    }
    let mut six_vol = 0.0f64;
    for f in faces {
        let a = sub(vertices[f[0] as usize], centroid);
        let b = sub(vertices[f[1] as usize], centroid);
        let c = sub(vertices[f[2] as usize], centroid);
        six_vol += det3(a, b, c);
    }
    Ok(six_vol / 6.0)
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Hash of the template topology (vertex count, faces, labels); used to check
/// that checkpoints and datasets agree before mixing them.
pub fn topology_hash(vertex_count: usize, faces: &[[u32; 3]], labels: &[u8]) -> u64 {
    // FNV-1a 64
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |byte: u8| {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    };
    for b in (vertex_count as u64).to_le_bytes() {
        eat(b);
    }
    for f in faces {
        for &i in f {
            for b in i.to_le_bytes() {
                eat(b);
            }
        }
    }
    for &l in labels {
        eat(l);
    }
    h
}
