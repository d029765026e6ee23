//! Assessment of rehabilitation exercise executions from skeleton motion
//! sequences.
//!
//! Two assessors are provided: a Gaussian mixture movement model fitted on
//! correct executions and thresholded on log-likelihood, and a spatio-temporal
//! graph convolutional classifier trained on both classes. Around them sit
//! skeleton-format definitions, preprocessing, an evaluation harness for
//! training-set-size sweeps, agreement metrics and a synthetic data
//! generator.

pub mod error;
pub mod eval;
pub mod gmm;
pub mod seed;
pub mod skeleton;
pub mod stgcn;
pub mod synth;

pub use error::{Error, Result};
pub use skeleton::{FormatId, Label, MotionSequence, SkeletonGraph};
