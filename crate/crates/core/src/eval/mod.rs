//! Evaluation harness: metrics, annotation handling, dataset splitting,
//! training-set-size sweeps and report emission.

pub mod annotations;
pub mod dataset;
pub mod metrics;
pub mod report;
pub mod split;
pub mod sweep;

pub use annotations::{binarize_scores, merge_annotations, AnnotationSet, MergePolicy};
pub use dataset::LabeledDataset;
pub use metrics::{accuracy, cohens_kappa, f1_score, krippendorff_alpha};
pub use report::{emit_report, parse_report_table, rows_to_csv, REPORT_CSV_HEADER};
pub use split::{split_dataset, SplitIndices, TrainSelection};
pub use sweep::{
    aggregate_rows, run_sweep, AggregateRow, Algorithm, EvaluationReport, ReportRow, SweepSpec,
};
