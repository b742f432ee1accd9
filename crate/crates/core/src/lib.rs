//! Semantically-guided video object segmentation.
//!
//! Instance proposals matched against the first-frame ground truth define a
//! semantic prior that is propagated through the video and used to gate two
//! conditional per-pixel classifiers. The crate also carries the evaluation
//! protocol and a synthetic-sequence harness.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod error;
pub mod eval;
pub mod harness;
pub mod mask;
pub mod postprocess;
pub mod prior;

pub use error::{Error, Result};
pub use mask::{BinaryMask, Grid, PixelFeatures, ProbMap, RealGrid, WeightMap};
