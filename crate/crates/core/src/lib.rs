//! Training and auditing of ERM and IRMv1 linear classifiers on
//! multi-environment datasets with controlled spurious correlations.
//!
//! The crate covers the full pipeline at desk scale: corpus ingestion and
//! feature assembly, environment synthesis with exact correlation control,
//! the penalized training objective with closed-form gradients, full-batch
//! Adam training, group-fairness audits, random hyperparameter search with
//! oracle selection, and an experiment harness that emits reproducible
//! report tables. Everything randomized takes an explicit seed and is
//! bit-deterministic across runs and thread counts.

pub mod dataset;
pub mod envsynth;
pub mod error;
pub mod harness;
pub mod hpsearch;
pub mod matrix;
pub mod metrics;
pub mod objective;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use objective::{Mode, ModelParams};
