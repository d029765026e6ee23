//! Thin adapters for raw capture exports.
//!
//! The interchange format is the canonical JSON document; these adapters
//! exist so `ingest` can lift common raw exports into it. The main one reads
//! Kinect joint-position CSV logs of the kind shipped with the KIMORE
//! recordings: one frame per line, 25 joints, either `x,y,z` or `x,y,z,w`
//! per joint, optionally followed by a trailing timestamp column.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::skeleton::graph::{FormatId, SkeletonGraph};
use crate::skeleton::sequence::MotionSequence;

/// Identifier strings attached to an ingested sequence.
#[derive(Debug, Clone)]
pub struct IngestMeta {
    pub exercise_id: String,
    pub subject_id: String,
    /// Frame rate used to synthesize timestamps when the file has none.
    pub fps: f64,
}

impl Default for IngestMeta {
    fn default() -> Self {
        IngestMeta {
            exercise_id: "unknown".into(),
            subject_id: "unknown".into(),
            fps: 30.0,
        }
    }
}

/// Parses a Kinect v2 joint-position CSV export into an unlabeled sequence.
pub fn parse_kinect_csv(content: &[u8], meta: &IngestMeta) -> Result<MotionSequence> {
    let graph = SkeletonGraph::kinect_v2();
    let text = std::str::from_utf8(content)
        .map_err(|_| Error::Parse("joint CSV is not valid UTF-8".into()))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line
            .split(&[',', ';'])
            .map(str::trim)
            .filter(|f| !f.is_empty())
            .collect();
        if fields.is_empty() {
            continue;
        }
        let values: Vec<f64> = fields
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("line {}: non-numeric field {f:?}", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        rows.push(values);
    }
    if rows.len() < 2 {
        return Err(Error::Schema(format!(
            "joint CSV has {} data rows, need at least 2",
            rows.len()
        )));
    }

    let width = rows[0].len();
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(Error::Schema(format!(
            "row {} has {} fields, expected {width}",
            i + 1,
            row.len()
        )));
    }

    let joints = graph.joint_count;
    // Accept J*stride fields with stride >= 3 (x,y,z plus extras such as a
    // tracking-confidence column), or the same plus one trailing timestamp.
    let (stride, has_timestamp) = if width % joints == 0 && width / joints >= 3 {
        (width / joints, false)
    } else if width > 1 && (width - 1) % joints == 0 && (width - 1) / joints >= 3 {
        ((width - 1) / joints, true)
    } else {
        return Err(Error::Schema(format!(
            "row width {width} does not decompose into {joints} joints of >=3 values"
        )));
    };

    let t = rows.len();
    let mut frames = Array3::<f64>::zeros((t, joints, 3));
    for (ti, row) in rows.iter().enumerate() {
        for ji in 0..joints {
            for di in 0..3 {
                frames[[ti, ji, di]] = row[ji * stride + di];
            }
        }
    }

    let timestamps: Vec<f64> = if has_timestamp {
        let raw: Vec<f64> = rows.iter().map(|r| r[width - 1]).collect();
        if raw.windows(2).all(|w| w[1] > w[0]) {
            raw
        } else {
            // Trailing column exists but is not a usable clock; synthesize.
            synthesize_timestamps(t, meta.fps)
        }
    } else {
        synthesize_timestamps(t, meta.fps)
    };

    let sequence = MotionSequence {
        frames,
        timestamps,
        format: FormatId::KinectV2,
        exercise_id: meta.exercise_id.clone(),
        subject_id: meta.subject_id.clone(),
        label: None,
        annotations: None,
    };
    sequence.validate(&graph)?;
    Ok(sequence)
}

fn synthesize_timestamps(t: usize, fps: f64) -> Vec<f64> {
    let fps = if fps.is_finite() && fps > 0.0 { fps } else { 30.0 };
    (0..t).map(|i| i as f64 / fps).collect()
}
