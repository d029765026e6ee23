//! `agreement`: inter-annotator agreement over the per-annotator labels
//! carried by sequence documents.

use std::collections::BTreeMap;

use rehab_core::error::{Error, Result};
use rehab_core::eval::metrics::{cohens_kappa, krippendorff_alpha};
use rehab_core::eval::AnnotationSet;
use rehab_core::skeleton::sequence::{Label, MotionSequence};

use crate::args::AgreementArgs;
use crate::io::{self, display_path};

struct Agreement {
    sequences: usize,
    annotators: usize,
    alpha: Result<f64>,
    /// Kappa per annotator pair, with the number of sequences both labeled.
    kappas: Vec<(usize, usize, f64, usize)>,
}

fn annotation_rows(sequences: &[&MotionSequence]) -> Vec<Vec<Option<Label>>> {
    sequences
        .iter()
        .filter_map(|s| s.annotations.as_ref())
        .map(|labels| labels.iter().copied().map(Some).collect())
        .collect()
}

fn measure(sequences: &[&MotionSequence]) -> Agreement {
    let rows = annotation_rows(sequences);
    let annotators = rows.iter().map(Vec::len).max().unwrap_or(0);
    let alpha = krippendorff_alpha(&AnnotationSet { items: rows.clone() });

    let mut kappas = Vec::new();
    for a in 0..annotators {
        for b in a + 1..annotators {
            let paired: Vec<(Label, Label)> = rows
                .iter()
                .filter(|r| r.len() > b)
                .map(|r| (r[a].expect("dense annotations"), r[b].expect("dense annotations")))
                .collect();
            if paired.is_empty() {
                continue;
            }
            let left: Vec<Label> = paired.iter().map(|(x, _)| *x).collect();
            let right: Vec<Label> = paired.iter().map(|(_, y)| *y).collect();
            if let Ok(kappa) = cohens_kappa(&left, &right) {
                kappas.push((a, b, kappa, paired.len()));
            }
        }
    }
    Agreement {
        sequences: rows.len(),
        annotators,
        alpha,
        kappas,
    }
}

fn print_agreement(name: &str, agreement: &Agreement) {
    println!(
        "{name}: {} annotated sequences, {} annotators",
        agreement.sequences, agreement.annotators
    );
    match &agreement.alpha {
        Ok(alpha) => println!("  alpha: {alpha:.4}"),
        Err(e) => println!("  alpha: undefined ({e})"),
    }
    for (a, b, kappa, n) in &agreement.kappas {
        println!("  kappa[{a},{b}]: {kappa:.4} ({n} sequences)");
    }
}

fn to_json(agreement: &Agreement) -> serde_json::Value {
    serde_json::json!({
        "sequences": agreement.sequences,
        "annotators": agreement.annotators,
        "alpha": agreement.alpha.as_ref().ok(),
        "kappa": agreement
            .kappas
            .iter()
            .map(|(a, b, kappa, n)| {
                serde_json::json!({"annotators": [a, b], "kappa": kappa, "sequences": n})
            })
            .collect::<Vec<_>>(),
    })
}

pub fn agreement(args: &AgreementArgs) -> Result<()> {
    let loaded = io::load_dataset(&args.data, None)?;
    let annotated: Vec<&MotionSequence> = loaded
        .sequences
        .iter()
        .filter(|s| s.annotations.is_some())
        .collect();
    if annotated.is_empty() {
        return Err(Error::Data(format!(
            "{} carries no per-annotator labels",
            display_path(&args.data)
        )));
    }

    let mut by_exercise: BTreeMap<&str, Vec<&MotionSequence>> = BTreeMap::new();
    for sequence in &annotated {
        by_exercise
            .entry(&sequence.exercise_id)
            .or_default()
            .push(sequence);
    }

    let mut doc = serde_json::Map::new();
    if by_exercise.len() > 1 {
        for (exercise, sequences) in &by_exercise {
            let agreement = measure(sequences);
            print_agreement(exercise, &agreement);
            doc.insert((*exercise).to_string(), to_json(&agreement));
        }
    }
    let overall = measure(&annotated);
    print_agreement("overall", &overall);
    doc.insert("overall".to_string(), to_json(&overall));

    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        let mut bytes = serde_json::to_vec_pretty(&serde_json::Value::Object(doc))
            .expect("agreement serialization");
        bytes.push(b'\n');
        std::fs::write(out.join("agreement.json"), bytes)?;
        io::write_resolved_config(
            out,
            "agreement",
            &[("data", display_path(&args.data))],
            &serde_json::json!({}),
        )?;
        println!("agreement written to {}", display_path(out));
    }
    Ok(())
}
