//! `sweep` and `report`: the evaluation harness and its file emission.

use std::str::FromStr;

use rehab_core::error::Result;
use rehab_core::eval::sweep::{run_sweep, Algorithm, EvaluationReport, SweepSpec};
use rehab_core::eval::{aggregate_rows, emit_report, parse_report_table};
use rehab_core::eval::{LabeledDataset, MergePolicy};

use crate::args::{ReportArgs, SweepArgs};
use crate::io::{self, display_path};

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let mut spec: SweepSpec = io::load_spec(&args.spec, "sweep spec")?;
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
    }
    if let Some(algorithm) = &args.algorithm {
        spec.algorithm = Algorithm::from_str(algorithm)?;
    }
    if let Some(format) = &args.format {
        spec.skeleton_format = io::parse_format(format)?;
    }
    spec.validate()?;

    let loaded = io::load_dataset(&args.data, Some(spec.skeleton_format))?;
    let registry = loaded.registry;
    let dataset = LabeledDataset::from_sequences(loaded.sequences, MergePolicy::Majority)?;

    log::info!(
        "sweep: {} algorithm, {} train sizes x {} validation sizes x {} repeats on {} sequences",
        spec.algorithm.as_str(),
        spec.train_sizes.len(),
        spec.validation_sizes.len(),
        spec.repeats,
        dataset.total_sequences()
    );
    let report = run_sweep(&dataset, &registry, &spec, args.jobs)?;

    let files = emit_report(&report, &args.out)?;
    io::write_resolved_config(
        &args.out,
        "sweep",
        &sweep_inputs(args),
        &spec,
    )?;

    for aggregate in &report.aggregates {
        let f1 = aggregate
            .mean_f1
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".to_string());
        let sd = aggregate
            .stddev_f1
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".to_string());
        println!(
            "{} train={} validation={}: mean F1 {} (sd {}) over {} cells{}",
            aggregate.algorithm.as_str(),
            aggregate.train_size,
            aggregate.validation_size,
            f1,
            sd,
            aggregate.cells,
            if aggregate.failed > 0 {
                format!(", {} failed", aggregate.failed)
            } else {
                String::new()
            }
        );
    }
    for file in &files {
        println!("wrote {}", display_path(file));
    }
    Ok(())
}

fn sweep_inputs(args: &SweepArgs) -> Vec<(&'static str, String)> {
    let mut v = vec![("data", display_path(&args.data))];
    if let Some(jobs) = args.jobs {
        v.push(("jobs", jobs.to_string()));
    }
    v
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.data)?;
    let rows = parse_report_table(&text)?;
    let aggregates = aggregate_rows(&rows);
    let report = EvaluationReport { rows, aggregates };
    let files = emit_report(&report, &args.out)?;
    io::write_resolved_config(
        &args.out,
        "report",
        &[("data", display_path(&args.data))],
        &serde_json::json!({}),
    )?;
    for file in &files {
        println!("wrote {}", display_path(file));
    }
    Ok(())
}
