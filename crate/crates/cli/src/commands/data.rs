//! `ingest` and `generate`: getting sequence data into canonical form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use rehab_core::error::Result;
use rehab_core::skeleton::manifest::DatasetManifest;
use rehab_core::skeleton::sequence::{serialize_sequence, Label, MotionSequence};
use rehab_core::synth::{generate_dataset, write_dataset, SyntheticSpec};

use crate::args::{GenerateArgs, IngestArgs};
use crate::io::{self, display_path};

#[derive(Default)]
struct ExerciseSummary {
    correct: usize,
    incorrect: usize,
    unlabeled: usize,
    min_frames: usize,
    max_frames: usize,
    subjects: std::collections::BTreeSet<String>,
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let format = io::parse_format_opt(&args.format)?;
    let loaded = io::load_dataset(&args.data, format)?;

    let mut by_exercise: BTreeMap<&str, ExerciseSummary> = BTreeMap::new();
    for sequence in &loaded.sequences {
        let entry = by_exercise.entry(&sequence.exercise_id).or_default();
        match sequence.label {
            Some(Label::Correct) => entry.correct += 1,
            Some(Label::Incorrect) => entry.incorrect += 1,
            None => entry.unlabeled += 1,
        }
        let frames = sequence.len();
        if entry.min_frames == 0 || frames < entry.min_frames {
            entry.min_frames = frames;
        }
        entry.max_frames = entry.max_frames.max(frames);
        entry.subjects.insert(sequence.subject_id.clone());
    }

    println!(
        "{}: {} sequences, {} exercises, format {}",
        display_path(&args.data),
        loaded.sequences.len(),
        by_exercise.len(),
        loaded.sequences[0].format.as_str()
    );
    for (exercise, s) in &by_exercise {
        println!(
            "  {exercise}: {} correct, {} incorrect, {} unlabeled; {}-{} frames; {} subjects",
            s.correct,
            s.incorrect,
            s.unlabeled,
            s.min_frames,
            s.max_frames,
            s.subjects.len()
        );
    }

    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        let mut names = Vec::with_capacity(loaded.sequences.len());
        for (i, sequence) in loaded.sequences.iter().enumerate() {
            let name = format!("{:04}_{}.json", i, io::file_safe(&sequence.exercise_id));
            std::fs::write(out.join(&name), serialize_sequence(sequence))?;
            names.push(name);
        }
        let manifest = DatasetManifest {
            sequences: names,
            graph: loaded.manifest.graph.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serialization");
        bytes.push(b'\n');
        std::fs::write(out.join("manifest.json"), bytes)?;
        io::write_resolved_config(
            out,
            "ingest",
            &inputs(&args.data, args.format.as_deref()),
            &serde_json::json!({}),
        )?;
        println!(
            "wrote {} canonical sequence documents to {}",
            loaded.sequences.len(),
            display_path(out)
        );
    }
    Ok(())
}

fn inputs(data: &std::path::Path, format: Option<&str>) -> Vec<(&'static str, String)> {
    let mut v = vec![("data", display_path(data))];
    if let Some(f) = format {
        v.push(("format", f.to_string()));
    }
    v
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    #[serde(default)]
    pub synth: SyntheticSpec,
    #[serde(default = "default_count")]
    pub correct: usize,
    #[serde(default = "default_count")]
    pub incorrect: usize,
    #[serde(default = "default_exercises")]
    pub exercises: Vec<String>,
}

fn default_count() -> usize {
    50
}

fn default_exercises() -> Vec<String> {
    vec!["exercise_a".to_string()]
}

impl Default for GenerateSpec {
    fn default() -> Self {
        GenerateSpec {
            synth: SyntheticSpec::default(),
            correct: default_count(),
            incorrect: default_count(),
            exercises: default_exercises(),
        }
    }
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let mut spec: GenerateSpec = match &args.spec {
        Some(path) => io::load_spec(path, "generator spec")?,
        None => GenerateSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.synth.seed = seed;
    }
    if let Some(correct) = args.correct {
        spec.correct = correct;
    }
    if let Some(incorrect) = args.incorrect {
        spec.incorrect = incorrect;
    }
    if let Some(exercises) = &args.exercises {
        spec.exercises = exercises.clone();
    }

    let exercise_refs: Vec<&str> = spec.exercises.iter().map(String::as_str).collect();
    let sequences: Vec<MotionSequence> =
        generate_dataset(&spec.synth, &exercise_refs, spec.correct, spec.incorrect)?;
    let manifest_path = write_dataset(&sequences, &spec.synth.graph, &args.out)?;
    io::write_resolved_config(&args.out, "generate", &[], &spec)?;

    println!(
        "generated {} sequences ({} correct + {} incorrect per exercise, {} exercises) at {}",
        sequences.len(),
        spec.correct,
        spec.incorrect,
        spec.exercises.len(),
        display_path(&manifest_path)
    );
    Ok(())
}
