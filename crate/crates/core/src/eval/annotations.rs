//! Annotator labels and their reduction to ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::sequence::Label;

/// Labels from multiple annotators over a set of sequences. Inner index is
/// the annotator; `None` marks a missing annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub items: Vec<Vec<Option<Label>>>,
}

impl AnnotationSet {
    /// Aligned complete-case labels of two annotators, for pairwise
    /// agreement metrics.
    pub fn pair(&self, a: usize, b: usize) -> (Vec<Label>, Vec<Label>) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for item in &self.items {
            if let (Some(Some(la)), Some(Some(lb))) = (item.get(a), item.get(b)) {
                left.push(*la);
                right.push(*lb);
            }
        }
        (left, right)
    }
}

/// How multiple annotator labels merge into a single ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergePolicy {
    /// Correct only when every annotator marked the execution correct.
    UnanimousCorrect,
    /// Majority vote; ties resolve to incorrect (an execution nobody can
    /// agree is correct should not train the movement model).
    Majority,
}

/// Merges each item's annotations into one label.
pub fn merge_annotations(set: &AnnotationSet, policy: MergePolicy) -> Result<Vec<Label>> {
    let mut merged = Vec::with_capacity(set.items.len());
    for (i, item) in set.items.iter().enumerate() {
        let values: Vec<Label> = item.iter().flatten().copied().collect();
        if values.is_empty() {
            return Err(Error::Data(format!("item {i} has no annotations")));
        }
        let correct = values.iter().filter(|l| **l == Label::Correct).count();
        let label = match policy {
            MergePolicy::UnanimousCorrect => {
                if correct == values.len() {
                    Label::Correct
                } else {
                    Label::Incorrect
                }
            }
            MergePolicy::Majority => {
                if 2 * correct > values.len() {
                    Label::Correct
                } else {
                    Label::Incorrect
                }
            }
        };
        merged.push(label);
    }
    Ok(merged)
}

/// Binarizes numeric quality scores (for example clinical 0..50 assessments)
/// at a cutoff: scores at or above become correct. `max_score` is the scale's
/// upper end; scores outside `[0, max_score]` are data errors.
pub fn binarize_scores(scores: &[f64], cutoff: f64, max_score: f64) -> Result<Vec<Label>> {
    if !(max_score > 0.0 && max_score.is_finite()) {
        return Err(Error::Config(format!(
            "max_score must be positive and finite, got {max_score}"
        )));
    }
    if !(cutoff.is_finite() && (0.0..=max_score).contains(&cutoff)) {
        return Err(Error::Config(format!(
            "cutoff must lie in [0, {max_score}], got {cutoff}"
        )));
    }
    scores
        .iter()
        .map(|&s| {
            if !s.is_finite() || !(0.0..=max_score).contains(&s) {
                return Err(Error::Data(format!(
                    "score {s} outside the [0, {max_score}] scale"
                )));
            }
            Ok(if s >= cutoff { Label::Correct } else { Label::Incorrect })
        })
        .collect()
}
