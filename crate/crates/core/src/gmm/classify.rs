//! Log-likelihood scoring and threshold calibration for the movement model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::f1_score;
use crate::gmm::density::log_sum_exp;
use crate::gmm::model::GmmModel;
use crate::skeleton::preprocess::to_gmm_datapoints;
use crate::skeleton::sequence::{Label, MotionSequence};

/// Average per-frame log-likelihood of a (preprocessed) sequence under the
/// model. Higher means more typical of the correct executions the model was
/// fitted on; the value is length-independent.
pub fn score(model: &GmmModel, sequence: &MotionSequence) -> Result<f64> {
    let points = to_gmm_datapoints(sequence);
    if points.ncols() != model.dimension {
        return Err(Error::Schema(format!(
            "sequence yields {}-dimensional observations but the model expects {}",
            points.ncols(),
            model.dimension
        )));
    }
    let prepared = model.prepared()?;
    let mut total = 0.0;
    let mut log_terms = vec![0.0; prepared.len()];
    for row in points.rows() {
        let point = nalgebra::DVector::from_iterator(points.ncols(), row.iter().copied());
        for (i, (log_weight, gaussian)) in prepared.iter().enumerate() {
            log_terms[i] = log_weight + gaussian.log_density(&point);
        }
        total += log_sum_exp(&log_terms);
    }
    let value = total / points.nrows() as f64;
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite sequence score {value}"
        )));
    }
    Ok(value)
}

/// A movement model plus a calibrated decision threshold: scores at or above
/// the threshold are classified as correct executions.
#[derive(Debug, Clone)]
pub struct GmmClassifier {
    pub model: GmmModel,
    pub threshold: f64,
    /// F1 achieved on the calibration data.
    pub calibration_f1: f64,
}

/// Serializable form of the threshold calibration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ThresholdDoc {
    pub threshold: f64,
    pub calibration_f1: f64,
}

/// Picks the classification threshold maximizing F1 on labeled validation
/// sequences.
///
/// Candidates are `-inf`, `+inf` and the midpoints between consecutive
/// distinct sorted validation scores; ties in F1 resolve to the smallest
/// candidate, so the decision boundary sits as low as the data allows.
pub fn calibrate_threshold(
    model: &GmmModel,
    validation: &[(MotionSequence, Label)],
) -> Result<GmmClassifier> {
    if validation.is_empty() {
        return Err(Error::Data("no validation sequences to calibrate on".into()));
    }
    let mut scores = Vec::with_capacity(validation.len());
    for (sequence, _) in validation {
        scores.push(score(model, sequence)?);
    }
    let truth: Vec<Label> = validation.iter().map(|(_, l)| *l).collect();
    let (threshold, calibration_f1) = calibrate_scores(&scores, &truth)?;
    Ok(GmmClassifier {
        model: model.clone(),
        threshold,
        calibration_f1,
    })
}

/// The threshold search itself: returns the F1-maximizing threshold for
/// `score >= threshold -> correct` and the F1 it achieves.
pub fn calibrate_scores(scores: &[f64], truth: &[Label]) -> Result<(f64, f64)> {
    if scores.is_empty() {
        return Err(Error::Data("no scores to calibrate on".into()));
    }
    if scores.len() != truth.len() {
        return Err(Error::Usage(format!(
            "{} scores against {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Numerical(format!("non-finite score {bad}")));
    }

    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    sorted.dedup();
    let mut candidates = Vec::with_capacity(sorted.len() + 1);
    candidates.push(f64::NEG_INFINITY);
    for pair in sorted.windows(2) {
        candidates.push(0.5 * (pair[0] + pair[1]));
    }
    candidates.push(f64::INFINITY);

    let mut best_threshold = f64::NEG_INFINITY;
    let mut best_f1 = -1.0;
    for &threshold in &candidates {
        let predictions: Vec<Label> = scores
            .iter()
            .map(|&s| if s >= threshold { Label::Correct } else { Label::Incorrect })
            .collect();
        let f1 = f1_score(&predictions, truth)?;
        if f1 > best_f1 {
            best_f1 = f1;
            best_threshold = threshold;
        }
    }
    Ok((best_threshold, best_f1))
}

/// Classifies by comparing the sequence score against the threshold
/// (inclusive on the correct side).
pub fn classify(classifier: &GmmClassifier, sequence: &MotionSequence) -> Result<Label> {
    let s = score(&classifier.model, sequence)?;
    Ok(if s >= classifier.threshold {
        Label::Correct
    } else {
        Label::Incorrect
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::fit::fit_points;
    use crate::gmm::model::GmmFitConfig;
    use crate::skeleton::graph::FormatId;
    use ndarray::{Array2, Array3};

    fn sequence_from_track(values: &[f64]) -> MotionSequence {
        // 2 joints x 1 coordinate; joint 1 carries the signal.
        let t = values.len();
        let mut frames = Array3::<f64>::zeros((t, 2, 1));
        for (i, &v) in values.iter().enumerate() {
            frames[[i, 1, 0]] = v;
        }
        MotionSequence {
            frames,
            timestamps: (0..t).map(|i| i as f64 / (t - 1) as f64).collect(),
            format: FormatId::Custom,
            exercise_id: "ex".into(),
            subject_id: "s".into(),
            label: None,
            annotations: None,
        }
    }

    fn reference_model() -> GmmModel {
        // Observations [t, 0, v]: v near zero everywhere.
        let mut points = Array2::<f64>::zeros((40, 3));
        for i in 0..40 {
            points[[i, 0]] = i as f64 / 39.0;
            points[[i, 2]] = 0.05 * ((i % 5) as f64 - 2.0);
        }
        fit_points(&points, "ex", &GmmFitConfig { k: 2, ..Default::default() }).unwrap()
    }

    #[test]
    fn score_is_length_independent_for_repeated_content() {
        let model = reference_model();
        let short = sequence_from_track(&[0.0, 0.05, -0.05, 0.0, 0.05, -0.05, 0.0, 0.05]);
        let s_short = score(&model, &short).unwrap();
        assert!(s_short.is_finite());
        // A typical sequence scores higher than a far-out one.
        let weird = sequence_from_track(&[5.0, 5.1, 4.9, 5.0, 5.2, 4.8, 5.0, 5.1]);
        let s_weird = score(&model, &weird).unwrap();
        assert!(s_short > s_weird);
    }

    #[test]
    fn dimension_mismatch_is_schema_error() {
        let model = reference_model();
        let mut frames = Array3::<f64>::zeros((4, 3, 1));
        frames[[0, 0, 0]] = 0.0;
        let seq = MotionSequence {
            frames,
            timestamps: vec![0.0, 0.3, 0.6, 1.0],
            format: FormatId::Custom,
            exercise_id: "ex".into(),
            subject_id: "s".into(),
            label: None,
            annotations: None,
        };
        let err = score(&model, &seq).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn calibration_separates_scores_and_prefers_smallest_threshold() {
        let model = reference_model();
        let make = |offset: f64| {
            sequence_from_track(&[offset, offset + 0.05, offset - 0.05, offset, offset + 0.05])
        };
        let validation = vec![
            (make(0.0), Label::Correct),
            (make(0.02), Label::Correct),
            (make(3.0), Label::Incorrect),
            (make(4.0), Label::Incorrect),
        ];
        let classifier = calibrate_threshold(&model, &validation).unwrap();
        assert_eq!(classifier.calibration_f1, 1.0);

        // The threshold must separate the classes, sitting between the
        // lowest correct score and the highest incorrect score.
        let s_good: Vec<f64> = validation[..2]
            .iter()
            .map(|(s, _)| score(&model, s).unwrap())
            .collect();
        let s_bad: Vec<f64> = validation[2..]
            .iter()
            .map(|(s, _)| score(&model, s).unwrap())
            .collect();
        let min_good = s_good.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_bad = s_bad.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(classifier.threshold <= min_good);
        assert!(classifier.threshold > max_bad);
        // Smallest maximizing candidate: the midpoint just above the best
        // incorrect score, not one higher up between the correct scores.
        let mut all: Vec<f64> = s_good.iter().chain(&s_bad).cloned().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = 0.5 * (all[1] + all[2]);
        assert_eq!(classifier.threshold, expected);

        for (seq, label) in &validation {
            assert_eq!(classify(&classifier, seq).unwrap(), *label);
        }
    }

    #[test]
    fn all_correct_validation_calibrates_to_minus_infinity() {
        let model = reference_model();
        let validation = vec![
            (sequence_from_track(&[0.0, 0.05, -0.05, 0.0]), Label::Correct),
            (sequence_from_track(&[0.01, 0.04, -0.04, 0.0]), Label::Correct),
        ];
        let classifier = calibrate_threshold(&model, &validation).unwrap();
        // -inf already classifies everything correct: F1 = 1, and ties pick
        // the smallest candidate.
        assert_eq!(classifier.threshold, f64::NEG_INFINITY);
        assert_eq!(classifier.calibration_f1, 1.0);
    }

    #[test]
    fn empty_validation_is_data_error() {
        let model = reference_model();
        let err = calibrate_threshold(&model, &[]).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
    }

    #[test]
    fn boundary_score_classifies_correct() {
        let model = reference_model();
        let seq = sequence_from_track(&[0.0, 0.05, -0.05, 0.0]);
        let s = score(&model, &seq).unwrap();
        let classifier = GmmClassifier {
            model: model.clone(),
            threshold: s,
            calibration_f1: 1.0,
        };
        assert_eq!(classify(&classifier, &seq).unwrap(), Label::Correct);
    }
}
