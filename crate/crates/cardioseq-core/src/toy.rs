//! Deterministic procedural generator of condition-dependent beating-heart
//! mesh sequences, standing in for restricted imaging cohorts.
//!
//! Geometry: the LV cavity is an ellipsoid; the myocardium is a concentric
//! shell bounded by two closed surfaces (the inner one oriented inward so the
//! label-induced signed volume equals the shell volume); the RV is a
//! laterally offset scaled half-ellipsoid closed by a flat septal cap.
//! Contraction multiplies LV/RV radii by `s(t) = 1 - a_eff * sin^2(pi t / T)`
//! so cavity volumes follow `V_ED * s(t)^3`, with end-diastole at frame 0.
//!
//! Surface radii are pre-multiplied by a per-topology calibration factor so
//! that the *mesh* volume of each structure equals the analytic ellipsoid
//! volume of its nominal radii, making the closed-form volume profile hold at
//! mesh level rather than within a discretization-dependent offset.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};
use crate::mesh::{
    closed_surface_volume, label, CardiacMesh, ClinicalConditions, MeshSequence,
};
use crate::rng::{derive_seed, Rng};
use crate::shapes;

/// Radius increase per cm of height above the 170 cm reference.
pub const HEIGHT_RADIUS_SLOPE: f64 = 0.003;
/// Radius increase per kg of weight above the 70 kg reference.
pub const WEIGHT_RADIUS_SLOPE: f64 = 0.002;
/// Relative radius increase for male subjects.
pub const MALE_RADIUS_FACTOR: f64 = 0.05;
/// Relative contraction increase for female subjects.
pub const FEMALE_CONTRACTION_BOOST: f64 = 0.1;
/// Relative contraction reduction per year of age above the 60 y reference.
pub const AGE_CONTRACTION_SLOPE: f64 = 0.004;
/// Contraction multiplier for the `LowEf` disease label.
pub const LOW_EF_CONTRACTION_FACTOR: f64 = 0.5;
/// Wall-thickness multiplier for the `ThickWall` disease label.
pub const THICK_WALL_FACTOR: f64 = 1.5;
/// RV half-ellipsoid radii relative to the LV radii.
pub const RV_RADII_FACTORS: [f64; 3] = [1.30, 1.55, 1.00];
/// Upper clamp on the effective contraction amplitude.
pub const MAX_EFFECTIVE_CONTRACTION: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DiseaseLabel {
    Healthy,
    LowEf,
    ThickWall,
}

impl DiseaseLabel {
    pub const ALL: [DiseaseLabel; 3] =
        [DiseaseLabel::Healthy, DiseaseLabel::LowEf, DiseaseLabel::ThickWall];

    pub fn as_str(&self) -> &'static str {
        match self {
            DiseaseLabel::Healthy => "healthy",
            DiseaseLabel::LowEf => "lowEF",
            DiseaseLabel::ThickWall => "thickWall",
        }
    }

    pub fn parse(s: &str) -> CoreResult<Self> {
        match s {
            "healthy" => Ok(DiseaseLabel::Healthy),
            "lowEF" => Ok(DiseaseLabel::LowEf),
            "thickWall" => Ok(DiseaseLabel::ThickWall),
            other => Err(CoreError::Input(format!("unknown disease label `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyGeneratorParams {
    /// Approximate vertex budget per labelled structure (the myocardium
    /// splits its budget across its two boundary surfaces).
    pub vertices_per_structure: usize,
    /// Frames per cardiac cycle.
    pub frames: usize,
    /// LV cavity semi-axes at end-diastole (mm), before condition scaling.
    pub base_lv_radii_mm: [f64; 3],
    pub myo_thickness_mm: f64,
    /// Lateral (+x) offset of the RV centre (mm), before condition scaling.
    pub rv_offset_mm: f64,
    /// Base radial contraction amplitude `a` in [0, 1).
    pub contraction_amplitude: f64,
    /// Standard deviation of the per-vertex Gaussian offset (mm), sampled
    /// once per subject and shared by all frames.
    pub noise_std_mm: f64,
    pub seed: u64,
}

impl Default for ToyGeneratorParams {
    fn default() -> Self {
        ToyGeneratorParams {
            vertices_per_structure: 160,
            frames: 20,
            base_lv_radii_mm: [28.0, 28.0, 37.0],
            myo_thickness_mm: 8.0,
            rv_offset_mm: 38.0,
            contraction_amplitude: 0.25,
            noise_std_mm: 0.5,
            seed: 0,
        }
    }
}

impl ToyGeneratorParams {
    pub fn validate(&self) -> CoreResult<()> {
        if !(0.0..1.0).contains(&self.contraction_amplitude) {
            return Err(CoreError::Param(format!(
                "contraction_amplitude must be in [0, 1), got {}",
                self.contraction_amplitude
            )));
        }
        if self.noise_std_mm < 0.0 {
            return Err(CoreError::Param(format!(
                "noise_std_mm must be >= 0, got {}",
                self.noise_std_mm
            )));
        }
        if self.frames < 2 {
            return Err(CoreError::Param(format!(
                "frames must be >= 2, got {}",
                self.frames
            )));
        }
        if self.vertices_per_structure < 24 {
            return Err(CoreError::Param(format!(
                "vertices_per_structure must be >= 24, got {}",
                self.vertices_per_structure
            )));
        }
        if self.base_lv_radii_mm.iter().any(|&r| !(r > 0.0)) || !(self.myo_thickness_mm > 0.0) {
            return Err(CoreError::Param("radii and thickness must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub conditions: ClinicalConditions,
    pub disease_label: DiseaseLabel,
    /// Per-subject seed derived from `(master_seed, subject_index)`.
    pub seed: u64,
}

/// Uniform sampling ranges for the population covariates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionRanges {
    pub age_years: (f64, f64),
    pub weight_kg: (f64, f64),
    pub height_cm: (f64, f64),
    pub male_fraction: f64,
}

impl Default for ConditionRanges {
    fn default() -> Self {
        ConditionRanges {
            age_years: (40.0, 80.0),
            weight_kg: (50.0, 100.0),
            height_cm: (150.0, 190.0),
            male_fraction: 0.5,
        }
    }
}

/// Disease-label proportions; must sum to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiseaseMix {
    pub healthy: f64,
    pub low_ef: f64,
    pub thick_wall: f64,
}

impl Default for DiseaseMix {
    fn default() -> Self {
        DiseaseMix {
            healthy: 0.8,
            low_ef: 0.1,
            thick_wall: 0.1,
        }
    }
}

impl DiseaseMix {
    pub fn proportions(&self) -> [f64; 3] {
        [self.healthy, self.low_ef, self.thick_wall]
    }

    pub fn validate(&self) -> CoreResult<()> {
        let p = self.proportions();
        if p.iter().any(|&x| x < 0.0) {
            return Err(CoreError::Param("disease mix proportions must be >= 0".into()));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::Param(format!(
                "disease mix proportions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Shared topology plus unit surfaces and volume-calibration factors.
pub struct ToyTemplate {
    pub faces: Vec<[u32; 3]>,
    pub vertex_labels: Vec<u8>,
    lv_unit: Vec<[f64; 3]>,
    myo_unit: Vec<[f64; 3]>,
    rv_unit: Vec<[f64; 3]>,
    /// Radius multipliers making mesh volumes match analytic ellipsoid
    /// volumes for each surface's tessellation.
    lv_calib: f64,
    myo_calib: f64,
    rv_calib: f64,
}

impl ToyTemplate {
    pub fn build(params: &ToyGeneratorParams) -> CoreResult<ToyTemplate> {
        params.validate()?;
        let s = params.vertices_per_structure;
        let (lv_nt, lv_np) = shapes::sphere_grid_for(s);
        let (myo_nt, myo_np) = shapes::sphere_grid_for((s / 2).max(24));
        let (rv_nt, rv_np) = shapes::half_grid_for(s);

        let (lv_unit, lv_faces) = shapes::unit_uv_sphere(lv_nt, lv_np);
        let (myo_unit, myo_faces) = shapes::unit_uv_sphere(myo_nt, myo_np);
        let (rv_unit, rv_faces) = shapes::unit_half_sphere_capped(rv_nt, rv_np);

        let sphere_vol = 4.0 / 3.0 * core::f64::consts::PI;
        let lv_k = closed_surface_volume(&lv_unit, &lv_faces)? / sphere_vol;
        let myo_k = closed_surface_volume(&myo_unit, &myo_faces)? / sphere_vol;
        let rv_k = closed_surface_volume(&rv_unit, &rv_faces)? / (sphere_vol / 2.0);

        let n_lv = lv_unit.len() as u32;
        let n_myo = myo_unit.len() as u32;
        let mut faces: Vec<[u32; 3]> = lv_faces;
        // myocardium inner boundary: same tessellation, flipped orientation
        faces.extend(myo_faces.iter().map(|f| [f[0] + n_lv, f[2] + n_lv, f[1] + n_lv]));
        // myocardium outer boundary
        faces.extend(
            myo_faces
                .iter()
                .map(|f| [f[0] + n_lv + n_myo, f[1] + n_lv + n_myo, f[2] + n_lv + n_myo]),
        );
        let rv_base = n_lv + 2 * n_myo;
        faces.extend(rv_faces.iter().map(|f| [f[0] + rv_base, f[1] + rv_base, f[2] + rv_base]));

        let mut vertex_labels = vec![label::LV; lv_unit.len()];
        vertex_labels.extend(vec![label::MYO; 2 * myo_unit.len()]);
        vertex_labels.extend(vec![label::RV; rv_unit.len()]);

        Ok(ToyTemplate {
            faces,
            vertex_labels,
            lv_unit,
            myo_unit,
            rv_unit,
            lv_calib: libm::cbrt(1.0 / lv_k),
            myo_calib: libm::cbrt(1.0 / myo_k),
            rv_calib: libm::cbrt(1.0 / rv_k),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_labels.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }
}

/// Size multiplier applied to all radii and the RV offset for one subject.
pub fn condition_scale(c: &ClinicalConditions) -> f64 {
    (1.0 + HEIGHT_RADIUS_SLOPE * (c.height_cm - 170.0))
        * (1.0 + WEIGHT_RADIUS_SLOPE * (c.weight_kg - 70.0))
        * (1.0 + MALE_RADIUS_FACTOR * c.sex as f64)
}

/// Effective contraction amplitude for one subject.
///
/// Multiplicative in all adjustments so that `a = 0` always yields a
/// motionless sequence: `a_eff = a * (1 + 0.1 * (1 - sex))
/// * (1 - 0.004 * (age - 60)) * (0.5 if lowEF)`, clamped to [0, 0.95].
pub fn effective_contraction(
    base: f64,
    conditions: &ClinicalConditions,
    disease: DiseaseLabel,
) -> f64 {
    let mut a = base
        * (1.0 + FEMALE_CONTRACTION_BOOST * (1.0 - conditions.sex as f64))
        * (1.0 - AGE_CONTRACTION_SLOPE * (conditions.age_years - 60.0));
    if disease == DiseaseLabel::LowEf {
        a *= LOW_EF_CONTRACTION_FACTOR;
    }
    a.clamp(0.0, MAX_EFFECTIVE_CONTRACTION)
}

/// Closed-form ejection fraction (%) implied by the contraction profile.
pub fn closed_form_ef(a_eff: f64) -> f64 {
    100.0 * (1.0 - (1.0 - a_eff) * (1.0 - a_eff) * (1.0 - a_eff))
}

/// Synthesizes one subject's beating-heart sequence.
///
/// Deterministic in `(conditions, disease, params)` including `params.seed`;
/// topology is identical for all subjects at the same resolution.
pub fn synth_subject(
    conditions: &ClinicalConditions,
    disease: DiseaseLabel,
    params: &ToyGeneratorParams,
) -> CoreResult<MeshSequence> {
    let template = ToyTemplate::build(params)?;
    synth_subject_with_template(&template, conditions, disease, params)
}

/// As [`synth_subject`] but reusing a prebuilt template.
pub fn synth_subject_with_template(
    template: &ToyTemplate,
    conditions: &ClinicalConditions,
    disease: DiseaseLabel,
    params: &ToyGeneratorParams,
) -> CoreResult<MeshSequence> {
    conditions.validate()?;
    params.validate()?;
    let scale = condition_scale(conditions);
    let lv_radii = params.base_lv_radii_mm.map(|r| r * scale);
    let mut thickness = params.myo_thickness_mm;
    if disease == DiseaseLabel::ThickWall {
        thickness *= THICK_WALL_FACTOR;
    }
    let a_eff = effective_contraction(params.contraction_amplitude, conditions, disease);
    let min_inner_es = lv_radii.iter().cloned().fold(f64::INFINITY, f64::min) * (1.0 - a_eff);
    if thickness >= min_inner_es {
        return Err(CoreError::Param(format!(
            "degenerate geometry: wall thickness {thickness:.3} mm >= minimal inner radius \
             {min_inner_es:.3} mm at end-systole"
        )));
    }
    let rv_radii = [
        lv_radii[0] * RV_RADII_FACTORS[0],
        lv_radii[1] * RV_RADII_FACTORS[1],
        lv_radii[2] * RV_RADII_FACTORS[2],
    ];
    let rv_offset = params.rv_offset_mm * scale;

    // one shared offset field for all frames
    let mut noise_rng = Rng::from_seed(params.seed);
    let v_total = template.vertex_count();
    let mut noise: Vec<[f64; 3]> = Vec::with_capacity(v_total);
    for _ in 0..v_total {
        noise.push([
            noise_rng.next_normal() * params.noise_std_mm,
            noise_rng.next_normal() * params.noise_std_mm,
            noise_rng.next_normal() * params.noise_std_mm,
        ]);
    }

    let t_frames = params.frames;
    let mut frames: Vec<CardiacMesh> = Vec::with_capacity(t_frames);
    for t in 0..t_frames {
        let phase = libm::sin(core::f64::consts::PI * t as f64 / t_frames as f64);
        let s = 1.0 - a_eff * phase * phase;
        let mut vertices: Vec<[f32; 3]> = Vec::with_capacity(v_total);
        let mut push =
            |points: &[[f64; 3]], radii: [f64; 3], center: [f64; 3], noise_at: &mut usize| {
                for p in points {
                    let n = noise[*noise_at];
                    *noise_at += 1;
                    vertices.push([
                        (p[0] * radii[0] + center[0] + n[0]) as f32,
                        (p[1] * radii[1] + center[1] + n[1]) as f32,
                        (p[2] * radii[2] + center[2] + n[2]) as f32,
                    ]);
                }
            };
        let mut at = 0usize;
        let inner = lv_radii.map(|r| r * s);
        push(
            &template.lv_unit,
            inner.map(|r| r * template.lv_calib),
            [0.0; 3],
            &mut at,
        );
        push(
            &template.myo_unit,
            inner.map(|r| r * template.myo_calib),
            [0.0; 3],
            &mut at,
        );
        push(
            &template.myo_unit,
            inner.map(|r| (r + thickness) * template.myo_calib),
            [0.0; 3],
            &mut at,
        );
        push(
            &template.rv_unit,
            rv_radii.map(|r| r * s * template.rv_calib),
            [rv_offset, 0.0, 0.0],
            &mut at,
        );
        frames.push(CardiacMesh {
            vertices,
            faces: template.faces.clone(),
            vertex_labels: template.vertex_labels.clone(),
        });
    }
    Ok(MeshSequence {
        frames,
        subject_id: String::new(),
        conditions: *conditions,
    })
}

/// Largest-remainder apportionment of `n` into integer counts.
pub fn largest_remainder(n: usize, proportions: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = proportions.iter().map(|p| (n as f64 * p) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut remainders: Vec<(usize, f64)> = proportions
        .iter()
        .enumerate()
        .map(|(i, p)| (i, n as f64 * p - counts[i] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..n.saturating_sub(assigned) {
        counts[remainders[k % remainders.len()].0] += 1;
    }
    counts
}

/// Synthesizes a labelled population.
///
/// Conditions are sampled per subject from an independent derived stream, so
/// output is a pure function of `(n, master_seed, mix, params, ranges)` and
/// independent of generation order or parallel fan-out. Label counts follow
/// largest-remainder rounding of the mix; label-to-subject assignment is a
/// seeded shuffle.
pub fn synth_population(
    n: usize,
    master_seed: u64,
    mix: &DiseaseMix,
    params: &ToyGeneratorParams,
    ranges: &ConditionRanges,
) -> CoreResult<Vec<(SubjectRecord, MeshSequence)>> {
    mix.validate()?;
    params.validate()?;
    let template = ToyTemplate::build(params)?;
    let records = plan_population(n, master_seed, mix, ranges);
    let mut out = Vec::with_capacity(n);
    for record in records {
        let mut subject_params = *params;
        subject_params.seed = derive_seed(record.seed, 1);
        let seq =
            synth_subject_with_template(&template, &record.conditions, record.disease_label, &subject_params)?;
        out.push((record, seq));
    }
    Ok(out)
}

/// The deterministic per-subject plan behind [`synth_population`]; exposed so
/// callers can fan subjects out to workers and still get identical output.
pub fn plan_population(
    n: usize,
    master_seed: u64,
    mix: &DiseaseMix,
    ranges: &ConditionRanges,
) -> Vec<SubjectRecord> {
    let counts = largest_remainder(n, &mix.proportions());
    let mut labels: Vec<DiseaseLabel> = Vec::with_capacity(n);
    for (label, &count) in DiseaseLabel::ALL.iter().zip(counts.iter()) {
        labels.extend(core::iter::repeat_n(*label, count));
    }
    Rng::from_seed(derive_seed(master_seed, 0)).shuffle(&mut labels);

    (0..n)
        .map(|i| {
            let seed = derive_seed(master_seed, 1 + i as u64);
            let mut rng = Rng::from_seed(derive_seed(seed, 0));
            let conditions = ClinicalConditions {
                age_years: rng.uniform(ranges.age_years.0, ranges.age_years.1),
                sex: (rng.next_f64() < ranges.male_fraction) as u8,
                weight_kg: rng.uniform(ranges.weight_kg.0, ranges.weight_kg.1),
                height_cm: rng.uniform(ranges.height_cm.0, ranges.height_cm.1),
            };
            SubjectRecord {
                conditions,
                disease_label: labels[i],
                seed,
            }
        })
        .collect()
}

/// Synthesizes the sequence for one planned record (used by parallel callers).
pub fn synth_planned_subject(
    template: &ToyTemplate,
    record: &SubjectRecord,
    params: &ToyGeneratorParams,
) -> CoreResult<MeshSequence> {
    let mut subject_params = *params;
    subject_params.seed = derive_seed(record.seed, 1);
    synth_subject_with_template(template, &record.conditions, record.disease_label, &subject_params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phenotype::{extract_phenotypes, DEFAULT_MYO_DENSITY};

    fn reference_conditions() -> ClinicalConditions {
        ClinicalConditions {
            age_years: 60.0,
            sex: 0,
            weight_kg: 70.0,
            height_cm: 170.0,
        }
    }

    #[test]
    fn no_contraction_no_noise_frames_identical() {
        let params = ToyGeneratorParams {
            contraction_amplitude: 0.0,
            noise_std_mm: 0.0,
            ..Default::default()
        };
        let seq = synth_subject(&reference_conditions(), DiseaseLabel::Healthy, &params).unwrap();
        for frame in &seq.frames[1..] {
            assert_eq!(frame.vertices, seq.frames[0].vertices);
        }
    }

    #[test]
    fn determinism_bitwise() {
        let params = ToyGeneratorParams {
            seed: 99,
            ..Default::default()
        };
        let c = reference_conditions();
        let a = synth_subject(&c, DiseaseLabel::LowEf, &params).unwrap();
        let b = synth_subject(&c, DiseaseLabel::LowEf, &params).unwrap();
        for (fa, fb) in a.frames.iter().zip(b.frames.iter()) {
            assert_eq!(fa.vertices, fb.vertices);
        }
    }

    #[test]
    fn generated_sequence_is_valid() {
        let seq =
            synth_subject(&reference_conditions(), DiseaseLabel::Healthy, &Default::default())
                .unwrap();
        seq.validate().unwrap();
        assert_eq!(seq.frame_count(), 20);
        // vertex budget: about 160 per structure, about 480 total
        let v = seq.frames[0].vertex_count();
        assert!((380..=580).contains(&v), "vertex count {v}");
    }

    #[test]
    fn volume_profile_matches_closed_form() {
        let params = ToyGeneratorParams {
            noise_std_mm: 0.0,
            ..Default::default()
        };
        let c = reference_conditions();
        let seq = synth_subject(&c, DiseaseLabel::Healthy, &params).unwrap();
        let a_eff = effective_contraction(params.contraction_amplitude, &c, DiseaseLabel::Healthy);
        let volumes = crate::phenotype::structure_volumes(&seq, label::LV).unwrap();
        let v_ed = volumes[0];
        for (t, &v) in volumes.iter().enumerate() {
            let phase = libm::sin(core::f64::consts::PI * t as f64 / params.frames as f64);
            let s = 1.0 - a_eff * phase * phase;
            let expect = v_ed * s * s * s;
            assert!(
                (v - expect).abs() / expect < 0.03,
                "frame {t}: {v} vs {expect}"
            );
        }
    }

    #[test]
    fn phenotypes_match_generator_closed_form() {
        // equal radii chosen for an analytic end-diastolic volume of 120 mL
        let r = libm::cbrt(120_000.0 * 3.0 / (4.0 * core::f64::consts::PI));
        let params = ToyGeneratorParams {
            base_lv_radii_mm: [r, r, r],
            contraction_amplitude: 0.4,
            noise_std_mm: 0.0,
            ..Default::default()
        };
        let c = reference_conditions();
        let seq = synth_subject(&c, DiseaseLabel::Healthy, &params).unwrap();
        let p = extract_phenotypes(&seq, DEFAULT_MYO_DENSITY).unwrap();
        assert_eq!(p.ed_frame, 0);
        assert!((p.lvedv - 120.0).abs() / 120.0 < 0.03, "lvedv {}", p.lvedv);
        let a_eff = effective_contraction(0.4, &c, DiseaseLabel::Healthy);
        let ef = closed_form_ef(a_eff);
        assert!((p.lvef - ef).abs() / ef < 0.03, "lvef {} vs {}", p.lvef, ef);
    }

    #[test]
    fn height_scaling_follows_documented_coefficient() {
        let params = ToyGeneratorParams {
            noise_std_mm: 0.0,
            ..Default::default()
        };
        let mut short = reference_conditions();
        short.height_cm = 160.0;
        let mut tall = reference_conditions();
        tall.height_cm = 176.0;
        let p_short = extract_phenotypes(
            &synth_subject(&short, DiseaseLabel::Healthy, &params).unwrap(),
            DEFAULT_MYO_DENSITY,
        )
        .unwrap();
        let p_tall = extract_phenotypes(
            &synth_subject(&tall, DiseaseLabel::Healthy, &params).unwrap(),
            DEFAULT_MYO_DENSITY,
        )
        .unwrap();
        let scale_ratio = condition_scale(&tall) / condition_scale(&short);
        let expect = scale_ratio * scale_ratio * scale_ratio;
        let got = p_tall.lvedv / p_short.lvedv;
        assert!((got - expect).abs() / expect < 0.02, "{got} vs {expect}");
    }

    #[test]
    fn low_ef_strictly_reduces_ef() {
        let params = ToyGeneratorParams::default();
        let c = reference_conditions();
        let healthy = extract_phenotypes(
            &synth_subject(&c, DiseaseLabel::Healthy, &params).unwrap(),
            DEFAULT_MYO_DENSITY,
        )
        .unwrap();
        let low = extract_phenotypes(
            &synth_subject(&c, DiseaseLabel::LowEf, &params).unwrap(),
            DEFAULT_MYO_DENSITY,
        )
        .unwrap();
        assert!(low.lvef < healthy.lvef, "{} !< {}", low.lvef, healthy.lvef);
    }

    #[test]
    fn degenerate_thickness_rejected() {
        let params = ToyGeneratorParams {
            myo_thickness_mm: 40.0,
            ..Default::default()
        };
        let err = synth_subject(&reference_conditions(), DiseaseLabel::Healthy, &params)
            .unwrap_err();
        assert!(matches!(err, CoreError::Param(_)));
    }

    #[test]
    fn largest_remainder_examples() {
        assert_eq!(largest_remainder(10, &[0.8, 0.1, 0.1]), vec![8, 1, 1]);
        assert_eq!(largest_remainder(0, &[0.8, 0.1, 0.1]), vec![0, 0, 0]);
        assert_eq!(largest_remainder(5, &[0.5, 0.3, 0.2]), vec![3, 1, 1]);
        let counts = largest_remainder(7, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(counts.iter().sum::<usize>(), 7);
    }

    #[test]
    fn population_empty_and_counts() {
        let pop =
            synth_population(0, 1, &Default::default(), &Default::default(), &Default::default())
                .unwrap();
        assert!(pop.is_empty());
        let pop = synth_population(
            10,
            1,
            &Default::default(),
            &Default::default(),
            &Default::default(),
        )
        .unwrap();
        let low = pop
            .iter()
            .filter(|(r, _)| r.disease_label == DiseaseLabel::LowEf)
            .count();
        let thick = pop
            .iter()
            .filter(|(r, _)| r.disease_label == DiseaseLabel::ThickWall)
            .count();
        assert_eq!((pop.len(), low, thick), (10, 1, 1));
    }

    #[test]
    fn population_is_reproducible() {
        let a = synth_population(
            6,
            7,
            &Default::default(),
            &Default::default(),
            &Default::default(),
        )
        .unwrap();
        let b = synth_population(
            6,
            7,
            &Default::default(),
            &Default::default(),
            &Default::default(),
        )
        .unwrap();
        for ((ra, sa), (rb, sb)) in a.iter().zip(b.iter()) {
            assert_eq!(ra, rb);
            for (fa, fb) in sa.frames.iter().zip(sb.frames.iter()) {
                assert_eq!(fa.vertices, fb.vertices);
            }
        }
    }

    #[test]
    fn planned_subjects_match_population_path() {
        let mix = DiseaseMix::default();
        let params = ToyGeneratorParams::default();
        let ranges = ConditionRanges::default();
        let template = ToyTemplate::build(&params).unwrap();
        let pop = synth_population(5, 11, &mix, &params, &ranges).unwrap();
        let plan = plan_population(5, 11, &mix, &ranges);
        for (i, record) in plan.iter().enumerate() {
            assert_eq!(*record, pop[i].0);
            let seq = synth_planned_subject(&template, record, &params).unwrap();
            for (fa, fb) in seq.frames.iter().zip(pop[i].1.frames.iter()) {
                assert_eq!(fa.vertices, fb.vertices);
            }
        }
    }
}
