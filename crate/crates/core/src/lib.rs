//! Neural parametric singing synthesis over vocoder features.
//!
//! A frame-wise autoregressive network of gated dilated causal convolutions
//! predicts a constrained Gaussian mixture per feature channel (or a
//! Bernoulli voicing decision). Three such networks, one per vocoder stream,
//! are chained so that later streams condition on earlier ones.

pub mod cgm;
pub mod checkpoint;
pub mod error;
pub mod evalkit;
pub mod features;
pub mod generation;
pub mod kv;
pub mod netcore;
pub mod seeds;
pub mod training;

pub use error::{Error, Result};
