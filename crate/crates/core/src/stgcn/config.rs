//! Configuration of the spatio-temporal graph convolutional classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::graph::SkeletonGraph;

/// One spatio-temporal block: a gated temporal convolution into
/// `spatial_channels`, a graph convolution over joints, and a second gated
/// temporal convolution into `out_channels`. Each temporal convolution is
/// unpadded, shrinking the time axis by `temporal_kernel_size - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub in_channels: usize,
    pub spatial_channels: usize,
    pub out_channels: usize,
    pub temporal_kernel_size: usize,
}

fn default_blocks() -> Vec<BlockSpec> {
    vec![
        BlockSpec {
            in_channels: 3,
            spatial_channels: 32,
            out_channels: 32,
            temporal_kernel_size: 9,
        },
        BlockSpec {
            in_channels: 32,
            spatial_channels: 64,
            out_channels: 64,
            temporal_kernel_size: 9,
        },
    ]
}

fn default_lstm_hidden() -> usize {
    64
}
fn default_epochs() -> usize {
    250
}
fn default_batch_size() -> usize {
    8
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_input_length() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StgcnConfig {
    #[serde(default = "default_blocks")]
    pub blocks: Vec<BlockSpec>,
    #[serde(default = "default_lstm_hidden")]
    pub lstm_hidden: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub seed: u64,
    /// Frames per sequence fed to the network; sequences must be resampled
    /// to this length beforehand.
    #[serde(default = "default_input_length")]
    pub input_length: usize,
}

impl Default for StgcnConfig {
    fn default() -> Self {
        StgcnConfig {
            blocks: default_blocks(),
            lstm_hidden: default_lstm_hidden(),
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            seed: 0,
            input_length: default_input_length(),
        }
    }
}

impl StgcnConfig {
    /// Frames remaining after all unpadded temporal convolutions.
    pub fn output_length(&self) -> usize {
        let consumed: usize = self
            .blocks
            .iter()
            .map(|b| 2 * (b.temporal_kernel_size - 1))
            .sum();
        self.input_length.saturating_sub(consumed)
    }

    pub fn validate(&self, graph: &SkeletonGraph) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Config("at least one block is required".into()));
        }
        if self.blocks[0].in_channels != graph.dimensionality {
            return Err(Error::Config(format!(
                "first block expects {} input channels but the skeleton format provides {}",
                self.blocks[0].in_channels, graph.dimensionality
            )));
        }
        for (i, pair) in self.blocks.windows(2).enumerate() {
            if pair[1].in_channels != pair[0].out_channels {
                return Err(Error::Config(format!(
                    "block {} outputs {} channels but block {} expects {}",
                    i,
                    pair[0].out_channels,
                    i + 1,
                    pair[1].in_channels
                )));
            }
        }
        for (i, block) in self.blocks.iter().enumerate() {
            if block.temporal_kernel_size == 0 {
                return Err(Error::Config(format!("block {i}: temporal kernel size 0")));
            }
            if block.in_channels == 0 || block.spatial_channels == 0 || block.out_channels == 0 {
                return Err(Error::Config(format!("block {i}: zero-width channel")));
            }
        }
        if self.output_length() == 0 {
            return Err(Error::Config(format!(
                "temporal convolutions consume all {} input frames",
                self.input_length
            )));
        }
        if self.lstm_hidden == 0 {
            return Err(Error::Config("lstm_hidden must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}
