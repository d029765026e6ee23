//! Shared fixtures for the criterion benchmarks.
//!
//! Everything here is deterministic: the generator is seeded through the
//! spec, so repeated benchmark runs measure the same workload.

use rehab_core::gmm::GmmFitConfig;
use rehab_core::skeleton::{preprocess, PreprocessConfig, SkeletonGraph};
use rehab_core::stgcn::{BlockSpec, StgcnConfig};
use rehab_core::synth::{generate_dataset, SyntheticSpec};
use rehab_core::{Label, MotionSequence};

pub const TARGET_LENGTH: usize = 50;

pub fn spec() -> SyntheticSpec {
    SyntheticSpec::default()
}

/// Raw generated sequences plus the graph they were generated on.
pub fn raw_sequences(correct: usize, incorrect: usize) -> (SkeletonGraph, Vec<MotionSequence>) {
    let spec = spec();
    let sequences =
        generate_dataset(&spec, &["bench"], correct, incorrect).expect("benchmark data");
    (spec.graph, sequences)
}

/// Sequences resampled and normalized the way both assessors consume them.
pub fn preprocessed_sequences(
    correct: usize,
    incorrect: usize,
) -> (SkeletonGraph, Vec<MotionSequence>) {
    let (graph, raw) = raw_sequences(correct, incorrect);
    let config = PreprocessConfig {
        target_length: TARGET_LENGTH,
        ..PreprocessConfig::default()
    };
    let sequences = raw
        .iter()
        .map(|s| preprocess(s, &graph, &config).expect("preprocess"))
        .collect();
    (graph, sequences)
}

pub fn labeled(sequences: &[MotionSequence]) -> Vec<(MotionSequence, Label)> {
    sequences
        .iter()
        .map(|s| (s.clone(), s.label.expect("generated sequences are labeled")))
        .collect()
}

pub fn gmm_config() -> GmmFitConfig {
    GmmFitConfig {
        k: 4,
        seed: 17,
        ..GmmFitConfig::default()
    }
}

/// A network sized like the one the evaluation harness trains: one ST-Conv
/// sandwich block ahead of the LSTM, on full-length inputs.
pub fn stgcn_config() -> StgcnConfig {
    StgcnConfig {
        blocks: vec![BlockSpec {
            in_channels: 3,
            spatial_channels: 8,
            out_channels: 8,
            temporal_kernel_size: 5,
        }],
        lstm_hidden: 12,
        epochs: 1,
        batch_size: 8,
        learning_rate: 1e-3,
        seed: 17,
        input_length: TARGET_LENGTH,
    }
}
