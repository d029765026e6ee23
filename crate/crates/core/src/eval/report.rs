//! Report serialization: CSV tables, learning-curve plots, and a summary.
//!
//! All output is built with deterministic string formatting. Floats use
//! Rust's shortest round-trip `Display`, so a written table parses back to
//! bitwise-identical values.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::sweep::{AggregateRow, Algorithm, EvaluationReport, ReportRow};
use crate::skeleton::graph::FormatId;

pub const REPORT_CSV_HEADER: &str =
    "algorithm,skeleton_format,exercise_id,train_size,validation_size,repeat_index,seed,f1,accuracy,status";

const AGGREGATE_CSV_HEADER: &str = "algorithm,skeleton_format,train_size,validation_size,cells,failed,mean_f1,stddev_f1,mean_accuracy,stddev_accuracy";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders the per-cell table. `exercise_id` has commas replaced by `;` so
/// the column count stays fixed; `status` is the final column and may
/// contain commas.
pub fn rows_to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.algorithm.as_str(),
            r.skeleton_format.as_str(),
            r.exercise_id.replace(',', ";"),
            r.train_size,
            r.validation_size,
            r.repeat_index,
            r.seed,
            opt(r.f1),
            opt(r.accuracy),
            r.status.replace('\n', " "),
        );
    }
    out
}

fn aggregates_to_csv(aggregates: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_CSV_HEADER);
    out.push('\n');
    for a in aggregates {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            a.algorithm.as_str(),
            a.skeleton_format.as_str(),
            a.train_size,
            a.validation_size,
            a.cells,
            a.failed,
            opt(a.mean_f1),
            opt(a.stddev_f1),
            opt(a.mean_accuracy),
            opt(a.stddev_accuracy),
        );
    }
    out
}

/// Parses a table written by [`rows_to_csv`] back into rows.
pub fn parse_report_table(content: &str) -> Result<Vec<ReportRow>> {
    let mut lines = content.lines();
    match lines.next() {
        Some(header) if header == REPORT_CSV_HEADER => {}
        Some(other) => {
            return Err(Error::Parse(format!(
                "unexpected report header {other:?}"
            )))
        }
        None => return Err(Error::Parse("empty report table".into())),
    }

    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(10, ',').collect();
        if fields.len() != 10 {
            return Err(Error::Parse(format!(
                "report line {}: expected 10 fields, found {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse_err = |what: &str, value: &str| {
            Error::Parse(format!("report line {}: bad {what} {value:?}", lineno + 2))
        };
        let opt_f64 = |s: &str, what: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|_| parse_err(what, s))
            }
        };
        rows.push(ReportRow {
            algorithm: fields[0].parse::<Algorithm>()?,
            skeleton_format: fields[1]
                .parse::<FormatId>()
                .map_err(|_| parse_err("skeleton_format", fields[1]))?,
            exercise_id: fields[2].to_string(),
            train_size: fields[3].parse().map_err(|_| parse_err("train_size", fields[3]))?,
            validation_size: fields[4]
                .parse()
                .map_err(|_| parse_err("validation_size", fields[4]))?,
            repeat_index: fields[5]
                .parse()
                .map_err(|_| parse_err("repeat_index", fields[5]))?,
            seed: fields[6].parse().map_err(|_| parse_err("seed", fields[6]))?,
            f1: opt_f64(fields[7], "f1")?,
            accuracy: opt_f64(fields[8], "accuracy")?,
            status: fields[9].to_string(),
        });
    }
    Ok(rows)
}

/// Writes `report.csv`, `aggregates.csv`, `summary.md` and one learning-curve
/// SVG per (algorithm, skeleton format) pair into `dir`, returning the paths
/// in the order written.
pub fn emit_report(report: &EvaluationReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let rows_path = dir.join("report.csv");
    std::fs::write(&rows_path, rows_to_csv(&report.rows))?;
    written.push(rows_path);

    let agg_path = dir.join("aggregates.csv");
    std::fs::write(&agg_path, aggregates_to_csv(&report.aggregates))?;
    written.push(agg_path);

    let summary_path = dir.join("summary.md");
    std::fs::write(&summary_path, render_summary(report))?;
    written.push(summary_path);

    for (algorithm, format) in group_keys(&report.aggregates) {
        let svg = render_learning_curve(&report.aggregates, algorithm, format);
        let path = dir.join(format!(
            "learning_curve_{}_{}.svg",
            algorithm.as_str(),
            format.as_str()
        ));
        std::fs::write(&path, svg)?;
        written.push(path);
    }
    Ok(written)
}

fn group_keys(aggregates: &[AggregateRow]) -> Vec<(Algorithm, FormatId)> {
    let mut keys = Vec::new();
    for a in aggregates {
        let key = (a.algorithm, a.skeleton_format);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys
}

fn render_summary(report: &EvaluationReport) -> String {
    let mut out = String::from("# Evaluation summary\n");
    let failed_total: usize = report.aggregates.iter().map(|a| a.failed).sum();
    let _ = writeln!(
        out,
        "\n{} cells total, {} failed.\n",
        report.rows.len(),
        failed_total
    );

    for (algorithm, format) in group_keys(&report.aggregates) {
        let _ = writeln!(
            out,
            "## {} on {}\n",
            algorithm.as_str(),
            format.as_str()
        );
        out.push_str(
            "| train size | validation size | cells | failed | mean F1 | sd F1 | mean accuracy | sd accuracy |\n",
        );
        out.push_str("|---:|---:|---:|---:|---:|---:|---:|---:|\n");
        for a in report
            .aggregates
            .iter()
            .filter(|a| a.algorithm == algorithm && a.skeleton_format == format)
        {
            let fmt = |v: Option<f64>| match v {
                Some(x) => format!("{x:.4}"),
                None => "-".to_string(),
            };
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                a.train_size,
                a.validation_size,
                a.cells,
                a.failed,
                fmt(a.mean_f1),
                fmt(a.stddev_f1),
                fmt(a.mean_accuracy),
                fmt(a.stddev_accuracy),
            );
        }
        out.push('\n');
    }

    let failures: Vec<&ReportRow> =
        report.rows.iter().filter(|r| r.status != "ok").collect();
    if !failures.is_empty() {
        out.push_str("## Failed cells\n\n");
        for r in failures.iter().take(20) {
            let _ = writeln!(
                out,
                "- {} {} train={} validation={} repeat={}: {}",
                r.exercise_id,
                r.algorithm.as_str(),
                r.train_size,
                r.validation_size,
                r.repeat_index,
                r.status
            );
        }
        if failures.len() > 20 {
            let _ = writeln!(out, "- ... and {} more", failures.len() - 20);
        }
    }
    out
}

const PLOT_COLORS: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Mean F1 against training-set size, one polyline per validation size, with
/// sample-stddev error bars.
fn render_learning_curve(
    aggregates: &[AggregateRow],
    algorithm: Algorithm,
    format: FormatId,
) -> String {
    let group: Vec<&AggregateRow> = aggregates
        .iter()
        .filter(|a| a.algorithm == algorithm && a.skeleton_format == format)
        .collect();

    let mut train_sizes: Vec<usize> = group.iter().map(|a| a.train_size).collect();
    train_sizes.sort_unstable();
    train_sizes.dedup();
    let mut validation_sizes: Vec<usize> = group.iter().map(|a| a.validation_size).collect();
    validation_sizes.sort_unstable();
    validation_sizes.dedup();

    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (62.0, 150.0, 42.0, 56.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let min_ts = *train_sizes.first().unwrap_or(&0) as f64;
    let max_ts = *train_sizes.last().unwrap_or(&1) as f64;
    let x_of = |ts: f64| {
        if max_ts > min_ts {
            left + (ts - min_ts) / (max_ts - min_ts) * plot_w
        } else {
            left + plot_w / 2.0
        }
    };
    let y_of = |f1: f64| top + (1.0 - f1.clamp(0.0, 1.0)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{} / {}: F1 vs training-set size</text>",
        left + plot_w / 2.0,
        algorithm.as_str(),
        format.as_str()
    );

    // Gridlines and y tick labels.
    for i in 0..=4 {
        let f1 = i as f64 / 4.0;
        let y = y_of(f1);
        let _ = writeln!(
            svg,
            "<line x1=\"{left:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>",
            left + plot_w
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{f1:.2}</text>",
            left - 8.0,
            y + 4.0
        );
    }
    // X ticks at each train size.
    for &ts in &train_sizes {
        let x = x_of(ts as f64);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#888888\"/>",
            top + plot_h,
            top + plot_h + 5.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{ts}</text>",
            top + plot_h + 20.0
        );
    }
    let _ = writeln!(
        svg,
        "<rect x=\"{left:.2}\" y=\"{top:.2}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" fill=\"none\" stroke=\"#444444\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">training sequences</text>",
        left + plot_w / 2.0,
        height - 14.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">mean F1</text>",
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    for (si, &vs) in validation_sizes.iter().enumerate() {
        let color = PLOT_COLORS[si % PLOT_COLORS.len()];
        let mut points: Vec<(f64, f64, f64)> = group
            .iter()
            .filter(|a| a.validation_size == vs)
            .filter_map(|a| {
                a.mean_f1
                    .map(|m| (a.train_size as f64, m, a.stddev_f1.unwrap_or(0.0)))
            })
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));

        if points.len() > 1 {
            let path: Vec<String> = points
                .iter()
                .map(|&(ts, m, _)| format!("{:.2},{:.2}", x_of(ts), y_of(m)))
                .collect();
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                path.join(" ")
            );
        }
        for &(ts, m, sd) in &points {
            let x = x_of(ts);
            if sd > 0.0 {
                let _ = writeln!(
                    svg,
                    "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"{color}\"/>",
                    y_of(m + sd),
                    y_of(m - sd)
                );
            }
            let _ = writeln!(
                svg,
                "<circle cx=\"{x:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                y_of(m)
            );
        }

        let ly = top + 14.0 + si as f64 * 18.0;
        let lx = left + plot_w + 12.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{lx:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            ly - 4.0,
            lx + 18.0,
            ly - 4.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{ly:.2}\">validation={vs}</text>",
            lx + 24.0
        );
    }

    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::sweep::aggregate_rows;

    fn sample_rows() -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for (ts, f1) in [(4usize, 0.625), (8, 0.8000000000000003), (16, 1.0)] {
            for repeat in 0..2usize {
                rows.push(ReportRow {
                    algorithm: Algorithm::Gmm,
                    skeleton_format: FormatId::Custom,
                    exercise_id: "deep_squat".into(),
                    train_size: ts,
                    validation_size: 6,
                    repeat_index: repeat,
                    seed: 0x9e3779b97f4a7c15 ^ ts as u64,
                    f1: Some(f1 - repeat as f64 * 0.1),
                    accuracy: Some(f1 * 0.5 + 0.1),
                    status: "ok".into(),
                });
            }
        }
        rows.push(ReportRow {
            algorithm: Algorithm::Gmm,
            skeleton_format: FormatId::Custom,
            exercise_id: "deep_squat".into(),
            train_size: 32,
            validation_size: 6,
            repeat_index: 0,
            seed: 7,
            f1: None,
            accuracy: None,
            status: "failed: train_size 32 exceeds the 20 correct sequences, left after the test split".into(),
        });
        rows
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = sample_rows();
        let csv = rows_to_csv(&rows);
        assert!(csv.starts_with(REPORT_CSV_HEADER));
        let parsed = parse_report_table(&csv).unwrap();
        assert_eq!(parsed, rows);
    }

    #[test]
    fn status_commas_survive_round_trip() {
        let rows = sample_rows();
        let parsed = parse_report_table(&rows_to_csv(&rows)).unwrap();
        assert!(parsed.last().unwrap().status.contains("sequences, left"));
    }

    #[test]
    fn header_mismatch_is_parse_error() {
        let err = parse_report_table("foo,bar\n").unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "{err}");
    }

    #[test]
    fn truncated_line_is_parse_error() {
        let mut csv = String::from(REPORT_CSV_HEADER);
        csv.push_str("\ngmm,custom,e,4,2,0,1,0.5\n");
        let err = parse_report_table(&csv).unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "{err}");
    }

    #[test]
    fn emit_writes_all_files() {
        let rows = sample_rows();
        let report = EvaluationReport {
            aggregates: aggregate_rows(&rows),
            rows,
        };
        let dir = tempfile::tempdir().unwrap();
        let written = emit_report(&report, dir.path()).unwrap();
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            vec![
                "report.csv",
                "aggregates.csv",
                "summary.md",
                "learning_curve_gmm_custom.svg"
            ]
        );
        for path in &written {
            assert!(std::fs::metadata(path).unwrap().len() > 0);
        }
        let svg = std::fs::read_to_string(&written[3]).unwrap();
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("validation=6"));
        let summary = std::fs::read_to_string(&written[2]).unwrap();
        assert!(summary.contains("| 16 |"));
        assert!(summary.contains("Failed cells"));
    }

    #[test]
    fn emission_is_deterministic() {
        let rows = sample_rows();
        let report = EvaluationReport {
            aggregates: aggregate_rows(&rows),
            rows,
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        emit_report(&report, a.path()).unwrap();
        emit_report(&report, b.path()).unwrap();
        for name in ["report.csv", "aggregates.csv", "summary.md"] {
            assert_eq!(
                std::fs::read(a.path().join(name)).unwrap(),
                std::fs::read(b.path().join(name)).unwrap()
            );
        }
    }
}
