//! Toy-scale testbed for studying how fine-tuning reshapes the
//! language-specific and language-neutral parts of a multilingual encoder.
//!
//! The crate trains a small transformer encoder with masked-token prediction
//! on a synthetic multilingual corpus, fine-tunes it under four regimes
//! (frozen probe, plain fine-tuning, gradient reversal, alternating entropy
//! maximisation) and measures the resulting representation geometry with
//! probing classifiers, k-means with V-measure, and exact t-SNE.
//!
//! See `examples/` for one runnable program per capability.

pub mod analysis;
pub mod checkpoint;
pub mod data;
pub mod encoder;
pub mod error;
pub mod heads;
pub mod nn;
pub mod params;
pub mod pipeline;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
