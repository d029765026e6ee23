//! Motion sequences and the canonical sequence document.
//!
//! The canonical on-disk form is a JSON document with `format`,
//! `exercise_id`, `subject_id`, optional `label` and `annotations`,
//! `timestamps` and `frames` (a T x J x D nested list). Unknown fields are
//! ignored so annotated exports with extra metadata still load.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::graph::{FormatId, FormatRegistry, SkeletonGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Correct,
    Incorrect,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Correct => "correct",
            Label::Incorrect => "incorrect",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correct" => Ok(Label::Correct),
            "incorrect" => Ok(Label::Incorrect),
            other => Err(Error::Parse(format!(
                "label must be \"correct\" or \"incorrect\", got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One recorded exercise execution: joint positions over time.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    /// T x J x D joint positions.
    pub frames: Array3<f64>,
    /// Strictly increasing, length T.
    pub timestamps: Vec<f64>,
    pub format: FormatId,
    pub exercise_id: String,
    pub subject_id: String,
    /// Resolved ground-truth label, if known.
    pub label: Option<Label>,
    /// Raw per-annotator labels, aligned by annotator index across a dataset.
    pub annotations: Option<Vec<Label>>,
}

impl MotionSequence {
    pub fn len(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn joint_count(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn dimensionality(&self) -> usize {
        self.frames.shape()[2]
    }

    /// Checks internal consistency and agreement with `graph`.
    pub fn validate(&self, graph: &SkeletonGraph) -> Result<()> {
        let (t, j, d) = (self.len(), self.joint_count(), self.dimensionality());
        if t < 2 {
            return Err(Error::Schema(format!("sequence has {t} frames, need at least 2")));
        }
        if j != graph.joint_count || d != graph.dimensionality {
            return Err(Error::Schema(format!(
                "frames are {j} joints x {d} coords but format {} expects {} x {}",
                graph.format_id, graph.joint_count, graph.dimensionality
            )));
        }
        if self.timestamps.len() != t {
            return Err(Error::Schema(format!(
                "{} timestamps for {t} frames",
                self.timestamps.len()
            )));
        }
        for w in self.timestamps.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Data(format!(
                    "timestamps not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        for &t in &self.timestamps {
            if !t.is_finite() {
                return Err(Error::Data(format!("non-finite timestamp {t}")));
            }
        }
        if let Some(bad) = self.frames.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite joint coordinate {bad}")));
        }
        Ok(())
    }
}

// ── Canonical document ──────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct SequenceDoc {
    format: String,
    exercise_id: String,
    subject_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    annotations: Option<Vec<String>>,
    timestamps: Vec<f64>,
    /// `null` marks a missing coordinate (JSON has no NaN literal).
    frames: Vec<Vec<Vec<Option<f64>>>>,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Reject documents whose format differs from this one.
    pub expected_format: Option<FormatId>,
    /// Linearly interpolate non-finite joint coordinates from neighboring
    /// frames instead of rejecting the document.
    pub impute_missing: bool,
}

/// Parses a canonical sequence document.
pub fn parse_sequence(
    content: &[u8],
    registry: &FormatRegistry,
    options: &ParseOptions,
) -> Result<MotionSequence> {
    let doc: SequenceDoc = serde_json::from_slice(content)
        .map_err(|e| Error::Parse(format!("sequence document: {e}")))?;
    sequence_from_doc(doc, registry, options)
}

fn sequence_from_doc(
    doc: SequenceDoc,
    registry: &FormatRegistry,
    options: &ParseOptions,
) -> Result<MotionSequence> {
    let format: FormatId = doc.format.parse()?;
    if let Some(expected) = options.expected_format {
        if format != expected {
            return Err(Error::Schema(format!(
                "document format {format} does not match expected format {expected}"
            )));
        }
    }
    let graph = registry.resolve(format)?;

    let label = doc.label.as_deref().map(str::parse).transpose()?;
    let annotations = doc
        .annotations
        .map(|list| list.iter().map(|s| s.parse()).collect::<Result<Vec<Label>>>())
        .transpose()?;

    let t = doc.frames.len();
    if t < 2 {
        return Err(Error::Schema(format!("sequence has {t} frames, need at least 2")));
    }
    let (j, d) = (graph.joint_count, graph.dimensionality);
    let mut frames = Array3::<f64>::zeros((t, j, d));
    for (ti, frame) in doc.frames.iter().enumerate() {
        if frame.len() != j {
            return Err(Error::Schema(format!(
                "frame {ti} has {} joints, format {format} expects {j}",
                frame.len()
            )));
        }
        for (ji, joint) in frame.iter().enumerate() {
            if joint.len() != d {
                return Err(Error::Schema(format!(
                    "frame {ti} joint {ji} has {} coordinates, format {format} expects {d}",
                    joint.len()
                )));
            }
            for (di, &v) in joint.iter().enumerate() {
                frames[[ti, ji, di]] = v.unwrap_or(f64::NAN);
            }
        }
    }

    if options.impute_missing {
        impute_non_finite(&mut frames)?;
    }

    let sequence = MotionSequence {
        frames,
        timestamps: doc.timestamps,
        format,
        exercise_id: doc.exercise_id,
        subject_id: doc.subject_id,
        label,
        annotations,
    };
    sequence.validate(&graph)?;
    Ok(sequence)
}

/// Serializes to the canonical document. Parsing the output recovers the
/// sequence exactly: floats are written with shortest round-trip formatting.
pub fn serialize_sequence(sequence: &MotionSequence) -> Vec<u8> {
    let (t, j, d) = (
        sequence.len(),
        sequence.joint_count(),
        sequence.dimensionality(),
    );
    let mut frames = Vec::with_capacity(t);
    for ti in 0..t {
        let mut frame = Vec::with_capacity(j);
        for ji in 0..j {
            let mut joint = Vec::with_capacity(d);
            for di in 0..d {
                joint.push(Some(sequence.frames[[ti, ji, di]]));
            }
            frame.push(joint);
        }
        frames.push(frame);
    }
    let doc = SequenceDoc {
        format: sequence.format.as_str().to_string(),
        exercise_id: sequence.exercise_id.clone(),
        subject_id: sequence.subject_id.clone(),
        label: sequence.label.map(|l| l.as_str().to_string()),
        annotations: sequence
            .annotations
            .as_ref()
            .map(|list| list.iter().map(|l| l.as_str().to_string()).collect()),
        timestamps: sequence.timestamps.clone(),
        frames,
    };
    serde_json::to_vec(&doc).expect("sequence document serialization")
}

/// Replaces non-finite coordinates by linear interpolation along time within
/// each joint/coordinate track; leading and trailing gaps copy the nearest
/// finite value. A track with no finite value at all is unrecoverable.
fn impute_non_finite(frames: &mut Array3<f64>) -> Result<()> {
    let (t, j, d) = {
        let s = frames.shape();
        (s[0], s[1], s[2])
    };
    for ji in 0..j {
        for di in 0..d {
            let track: Vec<f64> = (0..t).map(|ti| frames[[ti, ji, di]]).collect();
            if track.iter().all(|v| v.is_finite()) {
                continue;
            }
            let finite: Vec<usize> = (0..t).filter(|&ti| track[ti].is_finite()).collect();
            if finite.is_empty() {
                return Err(Error::Data(format!(
                    "joint {ji} coordinate {di} has no finite values to impute from"
                )));
            }
            for ti in 0..t {
                if track[ti].is_finite() {
                    continue;
                }
                let next = finite.iter().copied().find(|&f| f > ti);
                let prev = finite.iter().copied().rev().find(|&f| f < ti);
                frames[[ti, ji, di]] = match (prev, next) {
                    (Some(p), Some(n)) => {
                        let alpha = (ti - p) as f64 / (n - p) as f64;
                        track[p] + alpha * (track[n] - track[p])
                    }
                    (Some(p), None) => track[p],
                    (None, Some(n)) => track[n],
                    (None, None) => unreachable!("finite is non-empty"),
                };
            }
        }
    }
    Ok(())
}
