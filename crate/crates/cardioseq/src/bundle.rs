//! On-disk subject bundles and dataset manifests.
//!
//! A bundle is a directory `subject_<id>/` holding `meta.json`,
//! `vertices.f32le` (frame-major, then vertex, then x/y/z, little-endian
//! float32), `faces.u32le`, and `vertex_labels.u8`. A dataset directory
//! contains bundles plus a `manifest.json` assigning each subject to a
//! train/val/test split.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use cardioseq_core::mesh::{label, CardiacMesh, ClinicalConditions, MeshSequence};
use cardioseq_core::toy::{DiseaseLabel, SubjectRecord};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BundleMeta {
    id: String,
    conditions: MetaConditions,
    disease_label: String,
    /// Generator seed of the subject; kept so a bundle round-trips the full
    /// subject record.
    seed: u64,
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "V")]
    v: usize,
    #[serde(rename = "F")]
    f: usize,
    label_names: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetaConditions {
    age: f64,
    sex: u8,
    weight: f64,
    height: f64,
}

/// Directory name of a subject bundle.
pub fn bundle_dir_name(id: &str) -> String {
    format!("subject_{id}")
}

/// Writes one subject bundle under `dataset_dir`; the sequence's
/// `subject_id` names the directory.
pub fn write_bundle(dataset_dir: &Path, record: &SubjectRecord, seq: &MeshSequence) -> Result<PathBuf> {
    if seq.subject_id.is_empty() {
        bail!("cannot write bundle: sequence has an empty subject id");
    }
    let first = seq
        .frames
        .first()
        .ok_or_else(|| anyhow!("cannot write bundle: sequence has no frames"))?;
    let dir = dataset_dir.join(bundle_dir_name(&seq.subject_id));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let meta = BundleMeta {
        id: seq.subject_id.clone(),
        conditions: MetaConditions {
            age: record.conditions.age_years,
            sex: record.conditions.sex,
            weight: record.conditions.weight_kg,
            height: record.conditions.height_cm,
        },
        disease_label: record.disease_label.as_str().to_string(),
        seed: record.seed,
        t: seq.frames.len(),
        v: first.vertex_count(),
        f: first.face_count(),
        label_names: label::NAMES.iter().map(|s| s.to_string()).collect(),
    };
    let meta_path = dir.join("meta.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")
        .with_context(|| format!("writing {}", meta_path.display()))?;

    let mut vertices = Vec::with_capacity(meta.t * meta.v * 3 * 4);
    for frame in &seq.frames {
        if frame.vertex_count() != meta.v {
            bail!(
                "frame vertex count {} differs from frame 0 ({})",
                frame.vertex_count(),
                meta.v
            );
        }
        for p in &frame.vertices {
            for &c in p {
                if !c.is_finite() {
                    bail!("non-finite vertex coordinate {c} in subject {}", meta.id);
                }
                vertices.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    fs::write(dir.join("vertices.f32le"), vertices)?;

    let mut faces = Vec::with_capacity(meta.f * 3 * 4);
    for face in &first.faces {
        for &i in face {
            faces.extend_from_slice(&i.to_le_bytes());
        }
    }
    fs::write(dir.join("faces.u32le"), faces)?;
    fs::write(dir.join("vertex_labels.u8"), &first.vertex_labels)?;
    Ok(dir)
}

fn read_exact_file(dir: &Path, name: &str, expected_len: usize) -> Result<Vec<u8>> {
    let path = dir.join(name);
    let bytes = fs::read(&path)
        .with_context(|| format!("format error: missing or unreadable `{name}` in {}", dir.display()))?;
    if bytes.len() != expected_len {
        bail!(
            "format error in `{name}`: expected {expected_len} bytes per meta.json, found {}",
            bytes.len()
        );
    }
    Ok(bytes)
}

/// Reads one subject bundle back into a record and sequence.
pub fn read_bundle(bundle_dir: &Path) -> Result<(SubjectRecord, MeshSequence)> {
    let meta_path = bundle_dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path)
        .with_context(|| format!("format error: missing `meta.json` in {}", bundle_dir.display()))?;
    let meta: BundleMeta = serde_json::from_str(&meta_text)
        .with_context(|| format!("format error parsing {}", meta_path.display()))?;
    if meta.label_names != label::NAMES {
        bail!(
            "format error in `meta.json`: label_names {:?} != {:?}",
            meta.label_names,
            label::NAMES
        );
    }

    let vert_bytes = read_exact_file(bundle_dir, "vertices.f32le", meta.t * meta.v * 3 * 4)?;
    let face_bytes = read_exact_file(bundle_dir, "faces.u32le", meta.f * 3 * 4)?;
    let labels = read_exact_file(bundle_dir, "vertex_labels.u8", meta.v)?;

    let mut faces = Vec::with_capacity(meta.f);
    for chunk in face_bytes.chunks_exact(12) {
        let idx = |o: usize| u32::from_le_bytes(chunk[o..o + 4].try_into().unwrap());
        faces.push([idx(0), idx(4), idx(8)]);
    }

    let mut frames = Vec::with_capacity(meta.t);
    let frame_bytes = meta.v * 3 * 4;
    for t in 0..meta.t {
        let slice = &vert_bytes[t * frame_bytes..(t + 1) * frame_bytes];
        let mut vertices = Vec::with_capacity(meta.v);
        for chunk in slice.chunks_exact(12) {
            let coord = |o: usize| f32::from_le_bytes(chunk[o..o + 4].try_into().unwrap());
            let p = [coord(0), coord(4), coord(8)];
            if !p.iter().all(|c| c.is_finite()) {
                bail!("format error in `vertices.f32le`: non-finite coordinate {p:?} at frame {t}");
            }
            vertices.push(p);
        }
        frames.push(CardiacMesh {
            vertices,
            faces: faces.clone(),
            vertex_labels: labels.clone(),
        });
    }

    let conditions = ClinicalConditions {
        age_years: meta.conditions.age,
        sex: meta.conditions.sex,
        weight_kg: meta.conditions.weight,
        height_cm: meta.conditions.height,
    };
    let record = SubjectRecord {
        conditions,
        disease_label: DiseaseLabel::parse(&meta.disease_label)
            .with_context(|| "format error in `meta.json` field `disease_label`")?,
        seed: meta.seed,
    };
    let seq = MeshSequence {
        frames,
        subject_id: meta.id,
        conditions,
    };
    Ok((record, seq))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub subjects: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub split: String,
}

pub const SPLITS: [&str; 3] = ["train", "val", "test"];

impl Manifest {
    pub fn write(&self, dataset_dir: &Path) -> Result<()> {
        let path = dataset_dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn read(dataset_dir: &Path) -> Result<Manifest> {
        let path = dataset_dir.join("manifest.json");
        let text = fs::read_to_string(&path)
            .with_context(|| format!("missing `manifest.json` in {}", dataset_dir.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Subject ids in `split` (manifest order); `all` selects every subject.
    pub fn split_ids(&self, split: &str) -> Result<Vec<String>> {
        if split != "all" && !SPLITS.contains(&split) {
            bail!("unknown split `{split}`; expected one of train/val/test/all");
        }
        let ids: Vec<String> = self
            .subjects
            .iter()
            .filter(|e| split == "all" || e.split == split)
            .map(|e| e.id.clone())
            .collect();
        if ids.is_empty() {
            bail!("split `{split}` is not present in the manifest or is empty");
        }
        Ok(ids)
    }
}

/// Loads every subject of a split, verifying that all bundles share one
/// template topology.
pub fn load_split(dataset_dir: &Path, split: &str) -> Result<Vec<(SubjectRecord, MeshSequence)>> {
    let manifest = Manifest::read(dataset_dir)?;
    let ids = manifest.split_ids(split)?;
    let mut out = Vec::with_capacity(ids.len());
    let mut topology: Option<u64> = None;
    for id in &ids {
        let (record, seq) = read_bundle(&dataset_dir.join(bundle_dir_name(id)))
            .with_context(|| format!("loading subject `{id}`"))?;
        let first = &seq.frames[0];
        let hash = cardioseq_core::mesh::topology_hash(
            first.vertex_count(),
            &first.faces,
            &first.vertex_labels,
        );
        match topology {
            None => topology = Some(hash),
            Some(expected) if expected != hash => {
                bail!(
                    "dataset error: subject `{id}` topology {hash:#x} differs from {expected:#x}"
                );
            }
            _ => {}
        }
        out.push((record, seq));
    }
    Ok(out)
}
