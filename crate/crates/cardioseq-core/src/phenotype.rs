//! Clinically inspired imaging phenotypes derived from a mesh sequence.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};
use crate::mesh::{label, MeshSequence};

/// Conventional myocardial tissue density (g/mL) used for mass estimates.
pub const DEFAULT_MYO_DENSITY: f64 = 1.05;

/// Chamber volumes, ejection fractions, and myocardial mass for one subject.
///
/// Volumes are millilitres, mass grams, ejection fractions percentages.
/// The end-diastolic/end-systolic frames are the LV cavity volume extrema
/// (ties break to the smallest frame index).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeSet {
    pub lvedv: f64,
    pub lvesv: f64,
    pub lvef: f64,
    pub lvm: f64,
    pub rvedv: f64,
    pub rvesv: f64,
    pub rvef: f64,
    pub ed_frame: usize,
    pub es_frame: usize,
}

/// The seven scalar phenotypes in their fixed reporting order.
pub const PHENOTYPE_NAMES: [&str; 7] =
    ["LVEDV", "LVESV", "LVEF", "LVM", "RVEDV", "RVESV", "RVEF"];

impl PhenotypeSet {
    /// Scalar values in [`PHENOTYPE_NAMES`] order.
    pub fn values(&self) -> [f64; 7] {
        [
            self.lvedv, self.lvesv, self.lvef, self.lvm, self.rvedv, self.rvesv, self.rvef,
        ]
    }
}

/// Per-frame signed volumes (mm^3) of one labelled structure.
pub fn structure_volumes(seq: &MeshSequence, structure: u8) -> CoreResult<Vec<f64>> {
    seq.frames
        .iter()
        .map(|frame| frame.structure_volume(structure))
        .collect()
}

/// Derives the phenotype set from a sequence.
///
/// ED is the frame of maximal LV cavity volume, ES the minimal one; RV
/// volumes are read at the LV-defined frames. Myocardial mass is the Myo
/// shell volume at ED times `myo_density` (g/mL).
pub fn extract_phenotypes(seq: &MeshSequence, myo_density: f64) -> CoreResult<PhenotypeSet> {
    if seq.frames.is_empty() {
        return Err(CoreError::Input("sequence has no frames".into()));
    }
    let lv = structure_volumes(seq, label::LV)?;
    let (ed_frame, es_frame) = ed_es_frames(&lv);
    let lvedv_mm3 = lv[ed_frame];
    let lvesv_mm3 = lv[es_frame];
    if !(lvedv_mm3 > 0.0) {
        return Err(CoreError::Input(format!(
            "degenerate geometry: LV end-diastolic volume {lvedv_mm3} mm^3 is not positive"
        )));
    }
    let rvedv_mm3 = seq.frames[ed_frame].structure_volume(label::RV)?;
    let rvesv_mm3 = seq.frames[es_frame].structure_volume(label::RV)?;
    let myo_mm3 = seq.frames[ed_frame].structure_volume(label::MYO)?;

    let lvedv = lvedv_mm3 / 1000.0;
    let lvesv = lvesv_mm3 / 1000.0;
    let rvedv = rvedv_mm3 / 1000.0;
    let rvesv = rvesv_mm3 / 1000.0;
    let lvef = 100.0 * (lvedv - lvesv) / lvedv;
    let rvef = if rvedv > 0.0 {
        100.0 * (rvedv - rvesv) / rvedv
    } else {
        0.0
    };
    Ok(PhenotypeSet {
        lvedv,
        lvesv,
        lvef,
        lvm: myo_mm3 / 1000.0 * myo_density,
        rvedv,
        rvesv,
        rvef,
        ed_frame,
        es_frame,
    })
}

/// (ED, ES) frame indices: argmax/argmin over per-frame volumes, ties to the
/// smallest index.
pub fn ed_es_frames(volumes: &[f64]) -> (usize, usize) {
    let mut ed = 0usize;
    let mut es = 0usize;
    for (t, &v) in volumes.iter().enumerate() {
        if v > volumes[ed] {
            ed = t;
        }
        if v < volumes[es] {
            es = t;
        }
    }
    (ed, es)
}
