//! Labeled datasets grouped by exercise.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::eval::annotations::{merge_annotations, AnnotationSet, MergePolicy};
use crate::skeleton::sequence::{Label, MotionSequence};

/// Sequences grouped by exercise, each carrying a resolved label. Exercises
/// iterate in lexicographic order so downstream processing is deterministic.
#[derive(Debug, Clone, Default)]
pub struct LabeledDataset {
    pub exercises: BTreeMap<String, Vec<MotionSequence>>,
}

impl LabeledDataset {
    /// Groups sequences by exercise, resolving labels. A sequence without an
    /// explicit label gets one by merging its annotations under `policy`.
    pub fn from_sequences(
        sequences: Vec<MotionSequence>,
        policy: MergePolicy,
    ) -> Result<LabeledDataset> {
        let mut exercises: BTreeMap<String, Vec<MotionSequence>> = BTreeMap::new();
        for (i, mut sequence) in sequences.into_iter().enumerate() {
            if sequence.label.is_none() {
                let annotations = sequence.annotations.clone().ok_or_else(|| {
                    Error::Data(format!(
                        "sequence {i} (subject {:?}) has neither label nor annotations",
                        sequence.subject_id
                    ))
                })?;
                let set = AnnotationSet {
                    items: vec![annotations.into_iter().map(Some).collect()],
                };
                sequence.label = Some(merge_annotations(&set, policy)?[0]);
            }
            exercises
                .entry(sequence.exercise_id.clone())
                .or_default()
                .push(sequence);
        }
        if exercises.is_empty() {
            return Err(Error::Data("dataset contains no sequences".into()));
        }
        Ok(LabeledDataset { exercises })
    }

    pub fn exercise_ids(&self) -> Vec<&str> {
        self.exercises.keys().map(String::as_str).collect()
    }

    pub fn total_sequences(&self) -> usize {
        self.exercises.values().map(Vec::len).sum()
    }

    /// One exercise's sequences, in storage order.
    pub fn sequences(&self, exercise_id: &str) -> Result<&[MotionSequence]> {
        self.exercises
            .get(exercise_id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Data(format!("unknown exercise {exercise_id:?}")))
    }

    /// Resolved labels of one exercise's sequences, in storage order.
    pub fn labels(&self, exercise_id: &str) -> Result<Vec<Label>> {
        let items = self.exercises.get(exercise_id).ok_or_else(|| {
            Error::Data(format!("unknown exercise {exercise_id:?}"))
        })?;
        items
            .iter()
            .map(|s| {
                s.label.ok_or_else(|| {
                    Error::Data(format!("sequence for subject {:?} lost its label", s.subject_id))
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::graph::FormatId;
    use ndarray::Array3;

    fn seq(exercise: &str, label: Option<Label>, annotations: Option<Vec<Label>>) -> MotionSequence {
        MotionSequence {
            frames: Array3::zeros((2, 2, 2)),
            timestamps: vec![0.0, 1.0],
            format: FormatId::Custom,
            exercise_id: exercise.into(),
            subject_id: "s".into(),
            label,
            annotations,
        }
    }

    #[test]
    fn groups_by_exercise_in_sorted_order() {
        let data = LabeledDataset::from_sequences(
            vec![
                seq("b", Some(Label::Correct), None),
                seq("a", Some(Label::Incorrect), None),
                seq("b", Some(Label::Incorrect), None),
            ],
            MergePolicy::UnanimousCorrect,
        )
        .unwrap();
        assert_eq!(data.exercise_ids(), vec!["a", "b"]);
        assert_eq!(data.exercises["b"].len(), 2);
        assert_eq!(data.total_sequences(), 3);
    }

    #[test]
    fn merges_annotations_when_label_missing() {
        let data = LabeledDataset::from_sequences(
            vec![
                seq("a", None, Some(vec![Label::Correct, Label::Correct])),
                seq("a", None, Some(vec![Label::Correct, Label::Incorrect])),
            ],
            MergePolicy::UnanimousCorrect,
        )
        .unwrap();
        assert_eq!(
            data.labels("a").unwrap(),
            vec![Label::Correct, Label::Incorrect]
        );
    }

    #[test]
    fn unlabeled_unannotated_sequence_is_data_error() {
        let err = LabeledDataset::from_sequences(
            vec![seq("a", None, None)],
            MergePolicy::Majority,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
    }
}
