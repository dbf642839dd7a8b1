//! Core algorithms for conditional generative modeling of beating-heart
//! surface mesh sequences.
//!
//! This crate is `no_std` (with `alloc`) and holds everything that does not
//! touch the filesystem: the mesh data model and geometry kernels, a
//! deterministic procedural heart-population generator, the sequence VAE
//! (graph-convolutional mesh encoder, temporal Transformer, mesh decoder)
//! together with its tape-based reverse-mode autodiff engine, the training
//! losses with analytic gradients, surface-distance and distribution metrics,
//! latent-space analysis, and a small cross-validated classification harness.
//!
//! File formats, checkpointing, the training loop orchestration, and the CLI
//! live in the companion `cardioseq` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod classify;
pub mod error;
pub mod latent;
pub mod losses;
pub mod mesh;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod phenotype;
pub mod rng;
pub mod shapes;
pub mod stats;
pub mod tape;
pub mod tensor;
pub mod toy;

pub use error::CoreError;
