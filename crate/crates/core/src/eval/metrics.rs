//! Classification and inter-rater agreement metrics.
//!
//! The positive class is `correct` throughout. Degenerate cases follow the
//! usual conventions: a confusion matrix with no positives anywhere scores
//! F1 = 1, and two raters in complete agreement with no expected disagreement
//! get kappa = 1.

use crate::error::{Error, Result};
use crate::eval::annotations::AnnotationSet;
use crate::skeleton::sequence::Label;

fn check_paired(predictions: &[Label], truth: &[Label]) -> Result<()> {
    if predictions.len() != truth.len() {
        return Err(Error::Usage(format!(
            "{} predictions for {} ground-truth labels",
            predictions.len(),
            truth.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Usage("cannot compute a metric over zero items".into()));
    }
    Ok(())
}

/// F1 of the `correct` class: harmonic mean of precision and recall.
pub fn f1_score(predictions: &[Label], truth: &[Label]) -> Result<f64> {
    check_paired(predictions, truth)?;
    let mut tp = 0.0f64;
    let mut fp = 0.0f64;
    let mut fn_ = 0.0f64;
    for (p, t) in predictions.iter().zip(truth) {
        match (p, t) {
            (Label::Correct, Label::Correct) => tp += 1.0,
            (Label::Correct, Label::Incorrect) => fp += 1.0,
            (Label::Incorrect, Label::Correct) => fn_ += 1.0,
            (Label::Incorrect, Label::Incorrect) => {}
        }
    }
    if tp == 0.0 && fp == 0.0 && fn_ == 0.0 {
        // No positives exist and none were predicted: perfect by convention.
        return Ok(1.0);
    }
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Fraction of matching labels.
pub fn accuracy(predictions: &[Label], truth: &[Label]) -> Result<f64> {
    check_paired(predictions, truth)?;
    let matches = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    Ok(matches as f64 / predictions.len() as f64)
}

/// Cohen's kappa between two raters over the same items.
///
/// `(p_o - p_e) / (1 - p_e)`; if the expected agreement `p_e` is 1 (both
/// raters constant and equal) the observed agreement is necessarily 1 too
/// and the result is 1.
pub fn cohens_kappa(rater_a: &[Label], rater_b: &[Label]) -> Result<f64> {
    check_paired(rater_a, rater_b)?;
    let n = rater_a.len() as f64;
    let mut observed = 0.0;
    let mut a_correct = 0.0;
    let mut b_correct = 0.0;
    for (a, b) in rater_a.iter().zip(rater_b) {
        if a == b {
            observed += 1.0;
        }
        if *a == Label::Correct {
            a_correct += 1.0;
        }
        if *b == Label::Correct {
            b_correct += 1.0;
        }
    }
    let p_o = observed / n;
    let p_e = (a_correct / n) * (b_correct / n)
        + (1.0 - a_correct / n) * (1.0 - b_correct / n);
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Krippendorff's alpha for nominal data with missing annotations.
///
/// Items with fewer than two annotations are excluded; the remaining values
/// enter the standard coincidence-matrix computation. Requires at least two
/// such items and at least two observed categories (otherwise expected
/// disagreement is zero and alpha is undefined).
pub fn krippendorff_alpha(annotations: &AnnotationSet) -> Result<f64> {
    let units: Vec<Vec<Label>> = annotations
        .items
        .iter()
        .map(|item| item.iter().flatten().copied().collect::<Vec<Label>>())
        .filter(|values| values.len() >= 2)
        .collect();
    if units.len() < 2 {
        return Err(Error::Usage(format!(
            "alpha needs at least 2 items with 2 or more annotations, got {}",
            units.len()
        )));
    }

    // Coincidence counts over the two categories.
    let idx = |l: Label| match l {
        Label::Correct => 0usize,
        Label::Incorrect => 1usize,
    };
    let mut coincidence = [[0.0f64; 2]; 2];
    for values in &units {
        let m = values.len() as f64;
        for (i, &a) in values.iter().enumerate() {
            for (j, &b) in values.iter().enumerate() {
                if i != j {
                    coincidence[idx(a)][idx(b)] += 1.0 / (m - 1.0);
                }
            }
        }
    }
    let n_c: [f64; 2] = [
        coincidence[0][0] + coincidence[0][1],
        coincidence[1][0] + coincidence[1][1],
    ];
    let n_total = n_c[0] + n_c[1];
    if n_c[0] == 0.0 || n_c[1] == 0.0 {
        return Err(Error::Usage(
            "alpha is undefined when only one category is observed".into(),
        ));
    }

    let observed_disagreement = coincidence[0][1] + coincidence[1][0];
    let expected_disagreement = 2.0 * n_c[0] * n_c[1] / (n_total - 1.0);
    Ok(1.0 - observed_disagreement / expected_disagreement)
}

#[cfg(test)]
mod tests {
    use super::*;

    const C: Label = Label::Correct;
    const I: Label = Label::Incorrect;

    #[test]
    fn f1_hand_worked_example() {
        // tp=2, fp=1, fn=1: P=2/3, R=2/3, F1=2/3.
        let pred = [C, C, C, I, I];
        let truth = [C, C, I, C, I];
        let f1 = f1_score(&pred, &truth).unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn f1_degenerate_conventions() {
        // No positives anywhere.
        assert_eq!(f1_score(&[I, I], &[I, I]).unwrap(), 1.0);
        // Positives exist but none predicted correctly.
        assert_eq!(f1_score(&[I, I], &[C, C]).unwrap(), 0.0);
        assert_eq!(f1_score(&[C, C], &[I, I]).unwrap(), 0.0);
        // Perfect.
        assert_eq!(f1_score(&[C, I, C], &[C, I, C]).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_counts_matches() {
        let acc = accuracy(&[C, I, C, I], &[C, C, C, I]).unwrap();
        assert!((acc - 0.75).abs() < 1e-15);
    }

    #[test]
    fn mismatched_lengths_are_usage_errors() {
        assert!(matches!(f1_score(&[C], &[C, I]).unwrap_err(), Error::Usage(_)));
        assert!(matches!(accuracy(&[], &[]).unwrap_err(), Error::Usage(_)));
        assert!(matches!(cohens_kappa(&[C], &[]).unwrap_err(), Error::Usage(_)));
    }

    #[test]
    fn kappa_hand_worked_example() {
        // Classic 2x2 table: agreements 20+15, disagreements 5+10, n=50.
        let mut a = Vec::new();
        let mut b = Vec::new();
        for _ in 0..20 {
            a.push(C);
            b.push(C);
        }
        for _ in 0..5 {
            a.push(C);
            b.push(I);
        }
        for _ in 0..10 {
            a.push(I);
            b.push(C);
        }
        for _ in 0..15 {
            a.push(I);
            b.push(I);
        }
        // p_o = 0.7, p_a(C)=0.5, p_b(C)=0.6, p_e = 0.3+0.2 = 0.5, kappa = 0.4.
        let kappa = cohens_kappa(&a, &b).unwrap();
        assert!((kappa - 0.4).abs() < 1e-12, "{kappa}");
    }

    #[test]
    fn kappa_perfect_and_chance() {
        assert_eq!(cohens_kappa(&[C, I, C], &[C, I, C]).unwrap(), 1.0);
        // Both raters constant and equal: p_e = 1 convention.
        assert_eq!(cohens_kappa(&[C, C], &[C, C]).unwrap(), 1.0);
        // Complete disagreement.
        let kappa = cohens_kappa(&[C, I], &[I, C]).unwrap();
        assert!(kappa < 0.0);
    }

    #[test]
    fn alpha_reference_example() {
        // Hand-worked binary example: two observers, 10 items, pairs
        // (0,0),(1,1),(0,1),(0,0),(0,0),(0,0),(0,0),(0,1),(1,0),(0,0),
        // using C for 0 and I for 1.
        let pairs = [
            (C, C),
            (I, I),
            (C, I),
            (C, C),
            (C, C),
            (C, C),
            (C, C),
            (C, I),
            (I, C),
            (C, C),
        ];
        let set = AnnotationSet {
            items: pairs
                .iter()
                .map(|&(a, b)| vec![Some(a), Some(b)])
                .collect(),
        };
        let alpha = krippendorff_alpha(&set).unwrap();
        // Coincidences: o_CI = o_IC = 3, n_C = 15, n_I = 5, n = 20.
        // D_o = 6; D_e = 2*15*5/19; alpha = 1 - 6*19/150 = 0.24.
        assert!((alpha - 0.24).abs() < 1e-12, "{alpha}");
    }

    #[test]
    fn alpha_ignores_items_with_missing_annotations() {
        let set = AnnotationSet {
            items: vec![
                vec![Some(C), Some(C), None],
                vec![Some(I), None, Some(I)],
                vec![Some(C), None, None], // dropped: single annotation
                vec![None, Some(C), Some(I)],
            ],
        };
        let alpha = krippendorff_alpha(&set).unwrap();
        // Same computation with the third item deleted.
        let reduced = AnnotationSet {
            items: vec![
                vec![Some(C), Some(C)],
                vec![Some(I), Some(I)],
                vec![Some(C), Some(I)],
            ],
        };
        assert_eq!(alpha, krippendorff_alpha(&reduced).unwrap());
    }

    #[test]
    fn alpha_single_category_is_error() {
        let set = AnnotationSet {
            items: vec![vec![Some(C), Some(C)], vec![Some(C), Some(C)]],
        };
        let err = krippendorff_alpha(&set).unwrap_err();
        assert!(matches!(err, Error::Usage(_)), "{err}");
    }

    #[test]
    fn alpha_perfect_agreement_with_two_categories() {
        let set = AnnotationSet {
            items: vec![vec![Some(C), Some(C)], vec![Some(I), Some(I)]],
        };
        assert_eq!(krippendorff_alpha(&set).unwrap(), 1.0);
    }
}
