//! Spatio-temporal graph convolutional classifier.

pub mod config;
pub mod layers;
pub mod model;
pub mod train;

pub use config::{BlockSpec, StgcnConfig};
pub use layers::spatial_graph_conv;
pub use model::{StgcnModel, StgcnParams, TrainingEpoch};
pub use train::{sequence_gradients, sequence_loss, train};
