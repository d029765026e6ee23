//! `train-gmm` and `train-stgcn`: per-exercise model fitting on a labeled
//! dataset. The output directory holds one model file per exercise plus the
//! resolved configuration, and is consumed as-is by `evaluate`.

use serde::{Deserialize, Serialize};

use rehab_core::error::{Error, Result};
use rehab_core::eval::{LabeledDataset, MergePolicy};
use rehab_core::gmm::classify::ThresholdDoc;
use rehab_core::gmm::{calibrate_threshold, fit_points, GmmFitConfig};
use rehab_core::skeleton::preprocess::{to_gmm_datapoints, PreprocessConfig};
use rehab_core::skeleton::sequence::{Label, MotionSequence};
use rehab_core::stgcn::{train as train_classifier, StgcnConfig};

use crate::args::TrainArgs;
use crate::cache::PreprocessCache;
use crate::io::{self, display_path};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainGmmSpec {
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub gmm: GmmFitConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainStgcnSpec {
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub stgcn: StgcnConfig,
}

struct PreparedExercise {
    exercise_id: String,
    pairs: Vec<(MotionSequence, Label)>,
}

struct Prepared {
    graph: rehab_core::skeleton::graph::SkeletonGraph,
    exercises: Vec<PreparedExercise>,
}

/// Loads, labels, and preprocesses the dataset once for either trainer.
fn prepare(args: &TrainArgs, preprocess_config: &PreprocessConfig) -> Result<Prepared> {
    let format = io::parse_format_opt(&args.format)?;
    let loaded = io::load_dataset(&args.data, format)?;
    let format = loaded.sequences[0].format;
    let graph = loaded.registry.resolve(format)?;
    let dataset = LabeledDataset::from_sequences(loaded.sequences, MergePolicy::Majority)?;
    let cache = PreprocessCache::from_env();

    let mut exercises = Vec::new();
    for exercise_id in dataset.exercise_ids() {
        let exercise_id = exercise_id.to_string();
        let mut pairs = Vec::new();
        for sequence in dataset.sequences(&exercise_id)? {
            let processed =
                cache.preprocess(sequence, &graph, preprocess_config, &loaded.registry)?;
            let label = processed.label.expect("labeled dataset");
            pairs.push((processed, label));
        }
        exercises.push(PreparedExercise { exercise_id, pairs });
    }
    Ok(Prepared { graph, exercises })
}

pub fn train_gmm(args: &TrainArgs) -> Result<()> {
    let mut spec: TrainGmmSpec = match &args.spec {
        Some(path) => io::load_spec(path, "training spec")?,
        None => TrainGmmSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.gmm.seed = seed;
    }

    let prepared = prepare(args, &spec.preprocess)?;
    std::fs::create_dir_all(&args.out)?;

    for exercise in &prepared.exercises {
        let correct: Vec<&MotionSequence> = exercise
            .pairs
            .iter()
            .filter(|(_, l)| *l == Label::Correct)
            .map(|(s, _)| s)
            .collect();
        if correct.is_empty() {
            return Err(Error::Data(format!(
                "exercise {} has no correct executions to fit the movement model on",
                exercise.exercise_id
            )));
        }
        let mut rows = Vec::new();
        for sequence in &correct {
            rows.push(to_gmm_datapoints(sequence));
        }
        let total: usize = rows.iter().map(|r| r.nrows()).sum();
        let mut points = ndarray::Array2::zeros((total, rows[0].ncols()));
        let mut offset = 0;
        for r in rows {
            points
                .slice_mut(ndarray::s![offset..offset + r.nrows(), ..])
                .assign(&r);
            offset += r.nrows();
        }

        let model = fit_points(&points, &exercise.exercise_id, &spec.gmm)?;
        let classifier = calibrate_threshold(&model, &exercise.pairs)?;

        let stem = io::file_safe(&exercise.exercise_id);
        std::fs::write(args.out.join(format!("gmm_{stem}.json")), model.to_json())?;
        let threshold = ThresholdDoc {
            threshold: classifier.threshold,
            calibration_f1: classifier.calibration_f1,
        };
        let mut bytes = serde_json::to_vec_pretty(&threshold).expect("threshold serialization");
        bytes.push(b'\n');
        std::fs::write(args.out.join(format!("gmm_{stem}.threshold.json")), bytes)?;

        println!(
            "{}: fitted {} components on {} correct sequences in {} iterations (final log-likelihood {:.4}); threshold {:.4}, calibration F1 {:.3}",
            exercise.exercise_id,
            model.components.len(),
            correct.len(),
            model.fit_metadata.iterations,
            model.fit_metadata.final_log_likelihood,
            classifier.threshold,
            classifier.calibration_f1
        );
    }

    io::write_resolved_config(&args.out, "train-gmm", &train_inputs(args), &spec)?;
    println!("models written to {}", display_path(&args.out));
    Ok(())
}

pub fn train_stgcn(args: &TrainArgs) -> Result<()> {
    let mut spec: TrainStgcnSpec = match &args.spec {
        Some(path) => io::load_spec(path, "training spec")?,
        None => TrainStgcnSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.stgcn.seed = seed;
    }
    if spec.stgcn.input_length != spec.preprocess.target_length {
        return Err(Error::Config(format!(
            "classifier input_length {} must equal preprocessing target_length {}",
            spec.stgcn.input_length, spec.preprocess.target_length
        )));
    }

    let prepared = prepare(args, &spec.preprocess)?;
    std::fs::create_dir_all(&args.out)?;

    for exercise in &prepared.exercises {
        let model = train_classifier(&spec.stgcn, &prepared.graph, &exercise.pairs)?;
        let stem = io::file_safe(&exercise.exercise_id);
        std::fs::write(args.out.join(format!("stgcn_{stem}.json")), model.to_json())?;

        let last = model.training_history.last().expect("non-empty history");
        println!(
            "{}: trained on {} sequences for {} epochs (final loss {:.4}, training accuracy {:.3})",
            exercise.exercise_id,
            exercise.pairs.len(),
            last.epoch,
            last.loss,
            last.accuracy
        );
    }

    io::write_resolved_config(&args.out, "train-stgcn", &train_inputs(args), &spec)?;
    println!("models written to {}", display_path(&args.out));
    Ok(())
}

fn train_inputs(args: &TrainArgs) -> Vec<(&'static str, String)> {
    let mut v = vec![("data", display_path(&args.data))];
    if let Some(f) = &args.format {
        v.push(("format", f.clone()));
    }
    v
}
