//! Skeleton formats, motion sequences and preprocessing.

pub mod adapters;
pub mod graph;
pub mod manifest;
pub mod preprocess;
pub mod sequence;

pub use graph::{build_normalized_adjacency, FormatId, FormatRegistry, SkeletonGraph, TorsoSpan};
pub use manifest::DatasetManifest;
pub use preprocess::{preprocess, to_gmm_datapoints, PreprocessConfig};
pub use sequence::{parse_sequence, serialize_sequence, Label, MotionSequence, ParseOptions};
