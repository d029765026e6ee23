//! Gaussian mixture movement model: density evaluation, EM fitting and
//! log-likelihood classification.

pub mod classify;
pub mod density;
pub mod fit;
pub mod model;

pub use classify::{calibrate_scores, calibrate_threshold, classify, score, GmmClassifier};
pub use density::{gaussian_log_density, log_sum_exp};
pub use fit::{fit, fit_points};
pub use model::{FitMetadata, GmmComponent, GmmFitConfig, GmmModel, InitMethod};
