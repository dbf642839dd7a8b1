//! Dataset synthesis: plans a labelled population, fans subject generation
//! out to workers, and writes bundles plus the split manifest.

use std::path::Path;

use anyhow::{bail, Result};

use cardioseq_core::toy::{
    largest_remainder, plan_population, synth_planned_subject, ConditionRanges, DiseaseMix,
    ToyGeneratorParams, ToyTemplate,
};

use crate::bundle::{write_bundle, Manifest, ManifestEntry};
use crate::parallel::run_parallel;

/// Fractions of subjects assigned to train/val/test (largest-remainder
/// rounding, assigned in subject order).
#[derive(Clone, Copy, Debug)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn parse(s: &str) -> Result<SplitFractions> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| anyhow::anyhow!("invalid split fractions `{s}`: {e}"))?;
        if parts.len() != 3 {
            bail!("split fractions need three comma-separated values, got `{s}`");
        }
        let sum: f64 = parts.iter().sum();
        if parts.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            bail!("split fractions must be non-negative and sum to 1, got `{s}`");
        }
        Ok(SplitFractions {
            train: parts[0],
            val: parts[1],
            test: parts[2],
        })
    }
}

fn id_width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len().max(3)
}

/// Generates `n` subjects into `out_dir` and writes the manifest. Output is a
/// pure function of the inputs; the worker count only changes wall time.
pub fn synth_dataset(
    out_dir: &Path,
    n: usize,
    master_seed: u64,
    mix: &DiseaseMix,
    params: &ToyGeneratorParams,
    ranges: &ConditionRanges,
    split: SplitFractions,
    workers: usize,
) -> Result<()> {
    mix.validate()?;
    params.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let plan = plan_population(n, master_seed, mix, ranges);
    let template = ToyTemplate::build(params)?;
    let width = id_width(n);

    run_parallel(&plan, workers, |i, record| {
        let mut seq = synth_planned_subject(&template, record, params)?;
        seq.subject_id = format!("{i:0width$}");
        write_bundle(out_dir, record, &seq)?;
        Ok(())
    })?;

    let counts = largest_remainder(n, &[split.train, split.val, split.test]);
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let split_name = if i < counts[0] {
            "train"
        } else if i < counts[0] + counts[1] {
            "val"
        } else {
            "test"
        };
        entries.push(ManifestEntry {
            id: format!("{i:0width$}"),
            split: split_name.to_string(),
        });
    }
    Manifest { subjects: entries }.write(out_dir)?;
    Ok(())
}
