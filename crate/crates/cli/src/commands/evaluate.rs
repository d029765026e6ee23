//! `evaluate`: score a labeled dataset with models from a training output
//! directory. The directory's resolved_config.json supplies the algorithm and
//! the preprocessing settings, so evaluation always matches training.

use std::collections::BTreeMap;
use std::path::Path;

use rehab_core::error::{Error, Result};
use rehab_core::eval::metrics::{accuracy, f1_score};
use rehab_core::eval::{LabeledDataset, MergePolicy};
use rehab_core::gmm::classify::ThresholdDoc;
use rehab_core::gmm::{classify, score, GmmClassifier, GmmModel};
use rehab_core::skeleton::preprocess::PreprocessConfig;
use rehab_core::stgcn::StgcnModel;

use crate::args::EvaluateArgs;
use crate::cache::PreprocessCache;
use crate::io::{self, display_path};

enum ExerciseModel {
    Gmm(GmmClassifier),
    Stgcn(StgcnModel),
}

struct ModelDir {
    algorithm: &'static str,
    preprocess: PreprocessConfig,
    models: BTreeMap<String, ExerciseModel>,
}

/// Reads a training output directory: resolved_config.json plus one model
/// file per exercise.
fn load_model_dir(dir: &Path) -> Result<ModelDir> {
    let config_path = dir.join("resolved_config.json");
    let bytes = std::fs::read(&config_path).map_err(|_| {
        Error::Schema(format!(
            "{} is not a training output directory (no resolved_config.json)",
            dir.display()
        ))
    })?;
    let config: serde_json::Value = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Parse(format!("{}: {e}", config_path.display())))?;

    let subcommand = config["subcommand"].as_str().unwrap_or_default();
    let algorithm = match subcommand {
        "train-gmm" => "gmm",
        "train-stgcn" => "stgcn",
        other => {
            return Err(Error::Schema(format!(
                "{} was written by {other:?}, not a training run",
                config_path.display()
            )))
        }
    };
    let preprocess: PreprocessConfig =
        serde_json::from_value(config["spec"]["preprocess"].clone()).map_err(|e| {
            Error::Parse(format!(
                "{}: preprocessing settings: {e}",
                config_path.display()
            ))
        })?;

    let mut models = BTreeMap::new();
    let prefix = format!("{algorithm}_");
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(stem) = name
            .strip_prefix(&prefix)
            .and_then(|rest| rest.strip_suffix(".json"))
        else {
            continue;
        };
        if stem.ends_with(".threshold") {
            continue;
        }
        let model_bytes = std::fs::read(&path)?;
        let model = match algorithm {
            "gmm" => {
                let model = GmmModel::from_json(&model_bytes)?;
                let threshold_path = dir.join(format!("{algorithm}_{stem}.threshold.json"));
                let threshold_bytes = std::fs::read(&threshold_path).map_err(|_| {
                    Error::Schema(format!(
                        "model {} has no threshold file {}",
                        path.display(),
                        threshold_path.display()
                    ))
                })?;
                let doc: ThresholdDoc = serde_json::from_slice(&threshold_bytes)
                    .map_err(|e| Error::Parse(format!("{}: {e}", threshold_path.display())))?;
                ExerciseModel::Gmm(GmmClassifier {
                    model,
                    threshold: doc.threshold,
                    calibration_f1: doc.calibration_f1,
                })
            }
            _ => ExerciseModel::Stgcn(StgcnModel::from_json(&model_bytes)?),
        };
        // Model files are named by the file-safe exercise stem; lookups
        // sanitize the dataset's exercise ids the same way.
        models.insert(stem.to_string(), model);
    }
    if models.is_empty() {
        return Err(Error::Schema(format!(
            "no {algorithm} model files in {}",
            dir.display()
        )));
    }
    Ok(ModelDir {
        algorithm,
        preprocess,
        models,
    })
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let model_dir = load_model_dir(&args.model)?;
    if let Some(expected) = &args.algorithm {
        if expected != model_dir.algorithm {
            return Err(Error::Config(format!(
                "--algorithm {expected} does not match the {} models in {}",
                model_dir.algorithm,
                display_path(&args.model)
            )));
        }
    }

    let loaded = io::load_dataset(&args.data, None)?;
    let format = loaded.sequences[0].format;
    let graph = loaded.registry.resolve(format)?;
    let dataset = LabeledDataset::from_sequences(loaded.sequences, MergePolicy::Majority)?;
    let cache = PreprocessCache::from_env();

    let mut prediction_rows = vec![
        "exercise_id,sequence_index,subject_id,truth,predicted,score".to_string(),
    ];
    let mut metrics = serde_json::Map::new();
    let mut evaluated_any = false;

    for exercise_id in dataset.exercise_ids() {
        let Some(model) = model_dir.models.get(&io::file_safe(exercise_id)) else {
            log::warn!("no model for exercise {exercise_id}; skipping");
            continue;
        };
        evaluated_any = true;

        let mut truth = Vec::new();
        let mut predicted = Vec::new();
        for (index, sequence) in dataset.sequences(exercise_id)?.iter().enumerate() {
            let processed =
                cache.preprocess(sequence, &graph, &model_dir.preprocess, &loaded.registry)?;
            let (label, value) = match model {
                ExerciseModel::Gmm(classifier) => (
                    classify(classifier, &processed)?,
                    score(&classifier.model, &processed)?,
                ),
                ExerciseModel::Stgcn(model) => {
                    (model.predict(&processed)?, model.forward(&processed)?)
                }
            };
            truth.push(processed.label.expect("labeled dataset"));
            predicted.push(label);
            prediction_rows.push(format!(
                "{},{},{},{},{},{}",
                exercise_id.replace(',', ";"),
                index,
                processed.subject_id.replace(',', ";"),
                truth.last().unwrap().as_str(),
                label.as_str(),
                value
            ));
        }

        let f1 = f1_score(&predicted, &truth)?;
        let acc = accuracy(&predicted, &truth)?;
        println!(
            "{exercise_id}: f1 {f1:.4}, accuracy {acc:.4} ({} sequences, {} algorithm)",
            truth.len(),
            model_dir.algorithm
        );
        metrics.insert(
            exercise_id.to_string(),
            serde_json::json!({"f1": f1, "accuracy": acc, "sequences": truth.len()}),
        );
    }

    if !evaluated_any {
        return Err(Error::Data(format!(
            "no exercise in {} has a model in {}",
            display_path(&args.data),
            display_path(&args.model)
        )));
    }

    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("predictions.csv"), prediction_rows.join("\n") + "\n")?;
        let doc = serde_json::json!({"algorithm": model_dir.algorithm, "exercises": metrics});
        let mut bytes = serde_json::to_vec_pretty(&doc).expect("metrics serialization");
        bytes.push(b'\n');
        std::fs::write(out.join("metrics.json"), bytes)?;
        io::write_resolved_config(
            out,
            "evaluate",
            &[
                ("data", display_path(&args.data)),
                ("model", display_path(&args.model)),
            ],
            &serde_json::json!({"preprocess": model_dir.preprocess}),
        )?;
        println!("predictions and metrics written to {}", display_path(out));
    }
    Ok(())
}
