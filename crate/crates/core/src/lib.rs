//! Sparse-coding contrastive learning laboratory.
//!
//! Synthetic data follows a sparse coding model: every token is a dictionary
//! feature combination plus isotropic Gaussian noise, with per-feature
//! activation frequencies that can be made imbalanced. A single-head
//! attention layer followed by bilateral-ReLU neurons embeds token sequences,
//! and training minimizes InfoNCE with a stop-gradient on the non-anchor
//! branch. Magnitude pruning masks the smallest neurons in the forward pass
//! while the decay-and-gradient update is applied to every neuron.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`dictionary`]: orthonormal feature dictionary and its complement.
//! - [`data`]: latent signals, samples, positive pairs and batches.
//! - [`encoder`]: attention + BReLU embedding with inspectable traces.
//! - [`contrastive`]: logits, InfoNCE and the stop-gradient batch gradient.
//! - [`pruning`]: forward magnitude masks.
//! - [`trainer`]: the optimization loop, bias schedule and stage detection.
//! - [`analytics`]: neuron/feature alignment and the neuron taxonomy.
//! - [`evaluation`]: positive-pair cosine and linear-probe regression.
//! - [`harness`]: experiment specs, sweeps, CSV output and checkpoints.

pub mod analytics;
pub mod contrastive;
pub mod data;
pub mod dictionary;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod harness;
mod nested;
pub mod pruning;
pub mod rng;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};
