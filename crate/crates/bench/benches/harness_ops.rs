//! Benchmarks for the operations around the assessors: data generation,
//! preprocessing, parsing, splitting and agreement metrics.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use rehab_core::eval::metrics::{cohens_kappa, f1_score, krippendorff_alpha};
use rehab_core::eval::{split_dataset, AnnotationSet, TrainSelection};
use rehab_core::skeleton::{
    build_normalized_adjacency, parse_sequence, preprocess, serialize_sequence, FormatRegistry,
    ParseOptions, PreprocessConfig,
};
use rehab_core::synth::generate_sequence;
use rehab_core::Label;

use rehab_bench::{raw_sequences, spec, TARGET_LENGTH};

fn data_benches(c: &mut Criterion) {
    let spec = spec();
    c.bench_function("synth/generate_sequence", |b| {
        b.iter(|| generate_sequence(black_box(&spec), "bench", Label::Correct, 3).expect("sample"))
    });

    let (graph, sequences) = raw_sequences(1, 0);
    let config = PreprocessConfig {
        target_length: TARGET_LENGTH,
        ..PreprocessConfig::default()
    };
    c.bench_function("skeleton/preprocess", |b| {
        b.iter(|| preprocess(black_box(&sequences[0]), &graph, &config).expect("preprocess"))
    });

    c.bench_function("skeleton/adjacency", |b| {
        b.iter(|| build_normalized_adjacency(black_box(&graph)).expect("adjacency"))
    });

    let registry = FormatRegistry::with_custom(graph.clone()).expect("registry");
    let document = serialize_sequence(&sequences[0]);
    let options = ParseOptions::default();
    c.bench_function("skeleton/parse_sequence", |b| {
        b.iter(|| {
            parse_sequence(black_box(document.as_slice()), &registry, &options).expect("parse")
        })
    });
}

fn eval_benches(c: &mut Criterion) {
    let labels: Vec<Label> = (0..200)
        .map(|i| {
            if i % 5 < 3 {
                Label::Correct
            } else {
                Label::Incorrect
            }
        })
        .collect();
    c.bench_function("eval/split_200", |b| {
        b.iter(|| {
            split_dataset(
                black_box(&labels),
                TrainSelection::CorrectOnly,
                40,
                20,
                0.3,
                9,
            )
            .expect("split")
        })
    });

    let predicted: Vec<Label> = labels.iter().rev().copied().collect();
    c.bench_function("metrics/f1_200", |b| {
        b.iter(|| f1_score(black_box(&predicted), black_box(&labels)).expect("f1"))
    });
    c.bench_function("metrics/kappa_200", |b| {
        b.iter(|| cohens_kappa(black_box(&predicted), black_box(&labels)).expect("kappa"))
    });

    let annotations = AnnotationSet {
        items: (0..200)
            .map(|i| {
                (0..3)
                    .map(|a| {
                        if (i + a) % 7 == 0 {
                            None
                        } else if (i * 31 + a * 17) % 5 < 3 {
                            Some(Label::Correct)
                        } else {
                            Some(Label::Incorrect)
                        }
                    })
                    .collect()
            })
            .collect(),
    };
    c.bench_function("metrics/alpha_200x3", |b| {
        b.iter(|| krippendorff_alpha(black_box(&annotations)).expect("alpha"))
    });
}

criterion_group!(benches, data_benches, eval_benches);
criterion_main!(benches);
