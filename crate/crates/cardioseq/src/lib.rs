//! IO, file formats, training orchestration, evaluation reports, and the CLI
//! for conditional generative modeling of beating-heart mesh sequences.
//!
//! The algorithmic core (mesh kernels, model, losses, metrics, classifiers)
//! lives in `cardioseq-core`; this crate adds everything that touches the
//! filesystem: subject bundles and manifests, checkpoints, the training
//! loop and its logs, CSV/JSON reports, and deterministic parallel fan-out.

pub mod analysis;
pub mod bundle;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod parallel;
pub mod report;
pub mod synth;
pub mod train;

pub use cardioseq_core as core;
