//! Training-set and validation-set size sweeps.
//!
//! A sweep evaluates one assessment algorithm over a grid of
//! (train_size, validation_size) cells, repeated with different split seeds,
//! for every exercise in a dataset. Cells are independent, so they run on a
//! rayon pool; results are collected in grid order and every random draw is
//! keyed by derived seeds, which makes reports byte-identical regardless of
//! the worker count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::dataset::LabeledDataset;
use crate::eval::metrics::{accuracy, f1_score};
use crate::eval::split::{split_dataset, SplitIndices, TrainSelection};
use crate::gmm::{calibrate_threshold, classify, fit, GmmFitConfig};
use crate::seed::SeedMixer;
use crate::skeleton::graph::{FormatId, FormatRegistry};
use crate::skeleton::preprocess::{preprocess, PreprocessConfig};
use crate::skeleton::sequence::{Label, MotionSequence};
use crate::stgcn::{train as train_stgcn, StgcnConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Gmm,
    Stgcn,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Gmm => "gmm",
            Algorithm::Stgcn => "stgcn",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmm" => Ok(Algorithm::Gmm),
            "stgcn" => Ok(Algorithm::Stgcn),
            other => Err(Error::Config(format!(
                "unknown algorithm {other:?}, expected \"gmm\" or \"stgcn\""
            ))),
        }
    }
}

fn default_repeats() -> usize {
    5
}

fn default_test_fraction() -> f64 {
    0.3
}

/// Declarative description of a sweep, loadable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub algorithm: Algorithm,
    pub skeleton_format: FormatId,
    pub train_sizes: Vec<usize>,
    /// Validation sizes to cross with every train size. The graph classifier
    /// calibrates nothing, so it takes exactly `[0]`.
    pub validation_sizes: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub gmm: GmmFitConfig,
    #[serde(default)]
    pub stgcn: StgcnConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train_sizes.is_empty() {
            return Err(Error::Config("train_sizes must not be empty".into()));
        }
        if self.train_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config("train_sizes must be positive".into()));
        }
        if self.train_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "train_sizes must be strictly ascending".into(),
            ));
        }
        if self.validation_sizes.is_empty() {
            return Err(Error::Config("validation_sizes must not be empty".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be positive".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        match self.algorithm {
            Algorithm::Gmm => {
                if self.validation_sizes.iter().any(|&s| s == 0) {
                    return Err(Error::Config(
                        "gmm sweeps need positive validation_sizes for threshold calibration"
                            .into(),
                    ));
                }
                self.gmm.validate()?;
            }
            Algorithm::Stgcn => {
                if self.validation_sizes != [0] {
                    return Err(Error::Config(
                        "stgcn sweeps take validation_sizes [0]; the classifier has no \
                         calibration stage"
                            .into(),
                    ));
                }
                if self.stgcn.input_length != self.preprocess.target_length {
                    return Err(Error::Config(format!(
                        "stgcn input_length {} does not match preprocess target_length {}",
                        self.stgcn.input_length, self.preprocess.target_length
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One sweep cell: a single trained model evaluated on its held-out test set.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportRow {
    pub algorithm: Algorithm,
    pub skeleton_format: FormatId,
    pub exercise_id: String,
    pub train_size: usize,
    pub validation_size: usize,
    pub repeat_index: usize,
    /// Seed of the split streams for this cell; shared across sizes so the
    /// held-out test set is paired within a repeat.
    pub seed: u64,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    /// `"ok"`, or `"failed: <reason>"` for cells that could not run.
    pub status: String,
}

/// Mean and spread of the ok rows in one grid cell, pooled over exercises
/// and repeats.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AggregateRow {
    pub algorithm: Algorithm,
    pub skeleton_format: FormatId,
    pub train_size: usize,
    pub validation_size: usize,
    pub cells: usize,
    pub failed: usize,
    pub mean_f1: Option<f64>,
    pub stddev_f1: Option<f64>,
    pub mean_accuracy: Option<f64>,
    pub stddev_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvaluationReport {
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<AggregateRow>,
}

/// Runs the full sweep grid. `jobs` caps rayon worker threads (`None` uses
/// the rayon default); the output is identical either way.
pub fn run_sweep(
    dataset: &LabeledDataset,
    registry: &FormatRegistry,
    spec: &SweepSpec,
    jobs: Option<usize>,
) -> Result<EvaluationReport> {
    spec.validate()?;
    if dataset.total_sequences() == 0 {
        return Err(Error::Data("dataset has no sequences".into()));
    }

    let graph = registry.resolve(spec.skeleton_format)?;
    let prepared = prepare_dataset(dataset, &graph, spec)?;

    // Grid order fixes row order; parallelism never reorders it.
    let mut cells = Vec::new();
    for exercise_id in prepared.iter().map(|(id, _)| id.clone()) {
        for &train_size in &spec.train_sizes {
            for &validation_size in &spec.validation_sizes {
                for repeat_index in 0..spec.repeats {
                    cells.push(CellCoords {
                        exercise_id: exercise_id.clone(),
                        train_size,
                        validation_size,
                        repeat_index,
                    });
                }
            }
        }
    }

    let run_all = || -> Vec<ReportRow> {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|coords| run_cell(&prepared, &graph, spec, coords))
            .collect()
    };
    let rows = match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(run_all)
        }
        None => run_all(),
    };

    let aggregates = aggregate_rows(&rows);
    Ok(EvaluationReport { rows, aggregates })
}

struct CellCoords {
    exercise_id: String,
    train_size: usize,
    validation_size: usize,
    repeat_index: usize,
}

type PreparedExercise = (String, Vec<(MotionSequence, Label)>);

/// Preprocesses every sequence once, up front. Format mismatches and
/// preprocessing failures abort the sweep; they would poison every cell.
fn prepare_dataset(
    dataset: &LabeledDataset,
    graph: &crate::skeleton::graph::SkeletonGraph,
    spec: &SweepSpec,
) -> Result<Vec<PreparedExercise>> {
    let mut out = Vec::new();
    for exercise_id in dataset.exercise_ids() {
        let exercise_id = exercise_id.to_string();
        let labels = dataset.labels(&exercise_id)?;
        let mut pairs = Vec::new();
        for (seq, label) in dataset.sequences(&exercise_id)?.iter().zip(labels) {
            if seq.format != spec.skeleton_format {
                return Err(Error::Schema(format!(
                    "sequence for exercise {exercise_id:?} has format {} but the sweep expects {}",
                    seq.format.as_str(),
                    spec.skeleton_format.as_str()
                )));
            }
            let prepped = preprocess(seq, graph, &spec.preprocess).map_err(|e| {
                Error::Data(format!("preprocessing failed for exercise {exercise_id:?}: {e}"))
            })?;
            pairs.push((prepped, label));
        }
        out.push((exercise_id, pairs));
    }
    Ok(out)
}

fn run_cell(
    prepared: &[PreparedExercise],
    graph: &crate::skeleton::graph::SkeletonGraph,
    spec: &SweepSpec,
    coords: &CellCoords,
) -> ReportRow {
    let cell_seed = SeedMixer::new(spec.base_seed)
        .mix_str("cell")
        .mix_str(&coords.exercise_id)
        .mix_u64(coords.repeat_index as u64)
        .finish();
    let mut row = ReportRow {
        algorithm: spec.algorithm,
        skeleton_format: spec.skeleton_format,
        exercise_id: coords.exercise_id.clone(),
        train_size: coords.train_size,
        validation_size: coords.validation_size,
        repeat_index: coords.repeat_index,
        seed: cell_seed,
        f1: None,
        accuracy: None,
        status: String::new(),
    };

    let pairs = &prepared
        .iter()
        .find(|(id, _)| *id == coords.exercise_id)
        .expect("cell coordinates come from the prepared list")
        .1;
    match evaluate_cell(pairs, graph, spec, coords, cell_seed) {
        Ok((f1, acc)) => {
            row.f1 = Some(f1);
            row.accuracy = Some(acc);
            row.status = "ok".to_string();
        }
        Err(e) => row.status = format!("failed: {e}"),
    }
    row
}

fn evaluate_cell(
    pairs: &[(MotionSequence, Label)],
    graph: &crate::skeleton::graph::SkeletonGraph,
    spec: &SweepSpec,
    coords: &CellCoords,
    cell_seed: u64,
) -> Result<(f64, f64)> {
    let labels: Vec<Label> = pairs.iter().map(|(_, l)| *l).collect();
    let train_seed = SeedMixer::new(cell_seed)
        .mix_str("train")
        .mix_str(spec.algorithm.as_str())
        .mix_u64(coords.train_size as u64)
        .mix_u64(coords.validation_size as u64)
        .finish();

    let selection = match spec.algorithm {
        Algorithm::Gmm => TrainSelection::CorrectOnly,
        Algorithm::Stgcn => TrainSelection::Stratified,
    };
    let split = split_dataset(
        &labels,
        selection,
        coords.train_size,
        coords.validation_size,
        spec.test_fraction,
        cell_seed,
    )?;
    if split.test.is_empty() {
        return Err(Error::Sizing("test split is empty".into()));
    }

    let predicted = match spec.algorithm {
        Algorithm::Gmm => gmm_predictions(pairs, spec, &split, train_seed)?,
        Algorithm::Stgcn => stgcn_predictions(pairs, graph, spec, &split, train_seed)?,
    };
    let actual: Vec<Label> = split.test.iter().map(|&i| pairs[i].1).collect();
    Ok((f1_score(&predicted, &actual)?, accuracy(&predicted, &actual)?))
}

fn gmm_predictions(
    pairs: &[(MotionSequence, Label)],
    spec: &SweepSpec,
    split: &SplitIndices,
    train_seed: u64,
) -> Result<Vec<Label>> {
    let train: Vec<MotionSequence> =
        split.train.iter().map(|&i| pairs[i].0.clone()).collect();
    let mut config = spec.gmm.clone();
    config.seed = train_seed;
    let model = fit(&train, &config)?;

    let validation: Vec<(MotionSequence, Label)> =
        split.validation.iter().map(|&i| pairs[i].clone()).collect();
    let classifier = calibrate_threshold(&model, &validation)?;

    split
        .test
        .iter()
        .map(|&i| classify(&classifier, &pairs[i].0))
        .collect()
}

fn stgcn_predictions(
    pairs: &[(MotionSequence, Label)],
    graph: &crate::skeleton::graph::SkeletonGraph,
    spec: &SweepSpec,
    split: &SplitIndices,
    train_seed: u64,
) -> Result<Vec<Label>> {
    let train: Vec<(MotionSequence, Label)> =
        split.train.iter().map(|&i| pairs[i].clone()).collect();
    let mut config = spec.stgcn.clone();
    config.seed = train_seed;
    let model = train_stgcn(&config, graph, &train)?;

    split.test.iter().map(|&i| model.predict(&pairs[i].0)).collect()
}

/// Pools ok rows per (train_size, validation_size) cell. Mean is the
/// arithmetic mean; spread is the sample standard deviation (n-1 divisor),
/// zero for a single row.
pub fn aggregate_rows(rows: &[ReportRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(Algorithm, FormatId, usize, usize)> = Vec::new();
    for row in rows {
        let key = (row.algorithm, row.skeleton_format, row.train_size, row.validation_size);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }

    keys.into_iter()
        .map(|(algorithm, skeleton_format, train_size, validation_size)| {
            let group: Vec<&ReportRow> = rows
                .iter()
                .filter(|r| {
                    r.algorithm == algorithm
                        && r.skeleton_format == skeleton_format
                        && r.train_size == train_size
                        && r.validation_size == validation_size
                })
                .collect();
            let ok: Vec<&ReportRow> = group.iter().copied().filter(|r| r.status == "ok").collect();
            let f1s: Vec<f64> = ok.iter().filter_map(|r| r.f1).collect();
            let accs: Vec<f64> = ok.iter().filter_map(|r| r.accuracy).collect();
            let (mean_f1, stddev_f1) = mean_stddev(&f1s);
            let (mean_accuracy, stddev_accuracy) = mean_stddev(&accs);
            AggregateRow {
                algorithm,
                skeleton_format,
                train_size,
                validation_size,
                cells: group.len(),
                failed: group.len() - ok.len(),
                mean_f1,
                stddev_f1,
                mean_accuracy,
                stddev_accuracy,
            }
        })
        .collect()
}

fn mean_stddev(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let stddev = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(stddev))
}
