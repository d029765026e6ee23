//! Deterministic train/validation/test splitting.
//!
//! The test set is drawn first from its own seed stream, so for a fixed seed
//! it is identical across every train/validation size in a sweep; varying
//! the train size then grows or shrinks the training pool without touching
//! the held-out data.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed::SeedMixer;
use crate::skeleton::sequence::Label;

/// What the training set may contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainSelection {
    /// Only correct executions (movement model fitting).
    CorrectOnly,
    /// Both classes, proportionally stratified (classifier training).
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits item indices `0..labels.len()` into disjoint train, validation and
/// test sets.
///
/// `test_fraction` of each class (rounded) is held out. The training set has
/// exactly `train_size` items and the validation set exactly
/// `validation_size`, drawn from the remainder; unsatisfiable sizes are
/// sizing errors naming the shortfall.
pub fn split_dataset(
    labels: &[Label],
    selection: TrainSelection,
    train_size: usize,
    validation_size: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<SplitIndices> {
    if labels.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    if train_size == 0 {
        return Err(Error::Sizing("train_size must be at least 1".into()));
    }

    let correct: Vec<usize> = indices_of(labels, Label::Correct);
    let incorrect: Vec<usize> = indices_of(labels, Label::Incorrect);

    // Held-out test set, stratified, from a seed stream that does not depend
    // on the requested sizes.
    let mut test_rng =
        ChaCha8Rng::seed_from_u64(SeedMixer::new(seed).mix_str("test").finish());
    let mut test = Vec::new();
    let mut rest_correct = draw_class(&correct, test_fraction, &mut test_rng, &mut test);
    let mut rest_incorrect = draw_class(&incorrect, test_fraction, &mut test_rng, &mut test);
    test.sort_unstable();

    // One shuffle per class for the train+validation draws; taking from the
    // front keeps the training set stable when only validation_size varies.
    let mut select_rng =
        ChaCha8Rng::seed_from_u64(SeedMixer::new(seed).mix_str("select").finish());
    rest_correct.shuffle(&mut select_rng);
    rest_incorrect.shuffle(&mut select_rng);

    let mut train = Vec::with_capacity(train_size);
    match selection {
        TrainSelection::CorrectOnly => {
            if rest_correct.len() < train_size {
                return Err(Error::Sizing(format!(
                    "train_size {train_size} exceeds the {} correct sequences left after the test split",
                    rest_correct.len()
                )));
            }
            train.extend(rest_correct.drain(..train_size));
        }
        TrainSelection::Stratified => {
            let (n_c, n_i) =
                stratified_counts(train_size, rest_correct.len(), rest_incorrect.len())
                    .map_err(|e| prefixed(e, "train"))?;
            train.extend(rest_correct.drain(..n_c));
            train.extend(rest_incorrect.drain(..n_i));
        }
    }

    let mut validation = Vec::with_capacity(validation_size);
    if validation_size > 0 {
        let (n_c, n_i) =
            stratified_counts(validation_size, rest_correct.len(), rest_incorrect.len())
                .map_err(|e| prefixed(e, "validation"))?;
        validation.extend(rest_correct.drain(..n_c));
        validation.extend(rest_incorrect.drain(..n_i));
    }

    train.sort_unstable();
    validation.sort_unstable();
    Ok(SplitIndices { train, validation, test })
}

fn indices_of(labels: &[Label], wanted: Label) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter_map(|(i, &l)| if l == wanted { Some(i) } else { None })
        .collect()
}

/// Moves `round(fraction * n)` shuffled items of one class into `test`,
/// returning the remainder in original order.
fn draw_class(
    class: &[usize],
    fraction: f64,
    rng: &mut ChaCha8Rng,
    test: &mut Vec<usize>,
) -> Vec<usize> {
    let mut shuffled: Vec<usize> = class.to_vec();
    shuffled.shuffle(rng);
    let take = (fraction * class.len() as f64).round() as usize;
    let taken: std::collections::HashSet<usize> = shuffled[..take].iter().copied().collect();
    test.extend(&shuffled[..take]);
    class.iter().copied().filter(|i| !taken.contains(i)).collect()
}

/// Proportional class allocation summing exactly to `size`, with each
/// available class represented when `size >= 2`.
fn stratified_counts(size: usize, avail_c: usize, avail_i: usize) -> Result<(usize, usize)> {
    let total = avail_c + avail_i;
    if size > total {
        return Err(Error::Sizing(format!(
            "requested {size} sequences but only {total} remain ({avail_c} correct, {avail_i} incorrect)"
        )));
    }
    let mut n_c = ((size as f64 * avail_c as f64) / total as f64).round() as usize;
    n_c = n_c.min(avail_c);
    let mut n_i = size - n_c;
    if n_i > avail_i {
        n_i = avail_i;
        n_c = size - n_i;
    }
    if size >= 2 {
        if n_c == 0 && avail_c > 0 && n_i >= 2 {
            n_c = 1;
            n_i -= 1;
        }
        if n_i == 0 && avail_i > 0 && n_c >= 2 {
            n_i = 1;
            n_c -= 1;
        }
    }
    Ok((n_c, n_i))
}

fn prefixed(err: Error, which: &str) -> Error {
    match err {
        Error::Sizing(m) => Error::Sizing(format!("{which}: {m}")),
        other => other,
    }
}
