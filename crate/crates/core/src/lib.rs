//! Streaming anomaly detection for univariate time series by robust
//! projection of sliding windows onto a learned low-rank trajectory subspace.
//!
//! The pipeline: embed a training series as a Hankel trajectory matrix
//! ([`trajectory`]), estimate its dominant left subspace robustly
//! ([`subspace`]), then score each new sample by the residual of a robust
//! projection of its window onto that subspace ([`projection`],
//! [`detector`]). [`baselines`], [`synth`] and [`eval`] provide the comparison
//! detectors, the synthetic benchmark generator, and the max-F1 harness.

pub mod baselines;
pub mod coherence;
pub mod detector;
pub mod error;
pub mod eval;
pub mod projection;
pub mod stats;
pub mod subspace;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result};
