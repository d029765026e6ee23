//! Training of the classifier: binary cross-entropy, Adam, seeded shuffling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::skeleton::graph::SkeletonGraph;
use crate::skeleton::sequence::{Label, MotionSequence};
use crate::stgcn::config::StgcnConfig;
use crate::stgcn::layers::sigmoid;
use crate::stgcn::model::{StgcnModel, StgcnParams, TrainingEpoch};

/// Numerically stable `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Binary cross-entropy from the logit; `target` is 1 for correct. Returns
/// (loss, d loss / d logit).
fn bce_from_logit(logit: f64, target: f64) -> (f64, f64) {
    let loss = softplus(logit) - target * logit;
    let grad = sigmoid(logit) - target;
    (loss, grad)
}

/// Loss of one (sequence, label) pair under the model, without gradients.
pub fn sequence_loss(model: &StgcnModel, sequence: &MotionSequence, label: Label) -> Result<f64> {
    model.check_input(sequence)?;
    let tape = model.forward_tape(&sequence.frames);
    let target = if label == Label::Correct { 1.0 } else { 0.0 };
    Ok(bce_from_logit(tape.logit, target).0)
}

/// Loss and parameter gradients of one (sequence, label) pair.
pub fn sequence_gradients(
    model: &StgcnModel,
    sequence: &MotionSequence,
    label: Label,
) -> Result<(f64, StgcnParams)> {
    model.check_input(sequence)?;
    let tape = model.forward_tape(&sequence.frames);
    let target = if label == Label::Correct { 1.0 } else { 0.0 };
    let (loss, d_logit) = bce_from_logit(tape.logit, target);
    Ok((loss, model.backward_tape(&tape, d_logit)))
}

struct Adam {
    m: StgcnParams,
    v: StgcnParams,
    step: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    fn new(params: &StgcnParams) -> Adam {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    fn update(&mut self, params: &mut StgcnParams, grads: &StgcnParams, learning_rate: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let mut p = params.tensors_mut();
        let g = grads.tensors();
        let mut m = self.m.tensors_mut();
        let mut v = self.v.tensors_mut();
        for idx in 0..p.len() {
            let pv = p[idx].1.as_slice_mut().expect("standard layout");
            let gv = g[idx].1.as_slice().expect("standard layout");
            let mv = m[idx].1.as_slice_mut().expect("standard layout");
            let vv = v[idx].1.as_slice_mut().expect("standard layout");
            for e in 0..pv.len() {
                mv[e] = self.beta1 * mv[e] + (1.0 - self.beta1) * gv[e];
                vv[e] = self.beta2 * vv[e] + (1.0 - self.beta2) * gv[e] * gv[e];
                let m_hat = mv[e] / bc1;
                let v_hat = vv[e] / bc2;
                pv[e] -= learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

/// Trains a classifier on labeled sequences (all of one exercise, already
/// resampled to `config.input_length`). Mini-batch gradient descent with
/// Adam over shuffled batches; fully deterministic given `config.seed`.
///
/// The learning rate follows cosine annealing from `config.learning_rate`
/// down to 1% of it across the configured epochs. With a constant rate,
/// Adam's normalized steps stay near full size after the loss has flattened
/// and will eventually bounce the parameters out of the minimum; the final
/// epoch's model is the one the toolkit ships, so training has to end
/// converged, not merely pass through convergence.
pub fn train(
    config: &StgcnConfig,
    graph: &SkeletonGraph,
    data: &[(MotionSequence, Label)],
) -> Result<StgcnModel> {
    if data.is_empty() {
        return Err(Error::Data("no training sequences".into()));
    }
    let correct = data.iter().filter(|(_, l)| *l == Label::Correct).count();
    if correct == 0 || correct == data.len() {
        return Err(Error::Config(format!(
            "training data must contain both classes, got {correct} correct of {}",
            data.len()
        )));
    }

    let mut model = StgcnModel::new(config.clone(), graph.clone())?;
    for (sequence, _) in data {
        model.check_input(sequence)?;
    }

    // Model initialization consumed the seed stream's start; shuffling gets
    // its own derived stream so batch order is independent of architecture.
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(
        crate::seed::SeedMixer::new(config.seed).mix_str("shuffle").finish(),
    );
    let mut adam = Adam::new(&model.params);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=config.epochs {
        let progress = (epoch - 1) as f64 / config.epochs as f64;
        let learning_rate = config.learning_rate
            * (0.01 + 0.99 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut epoch_correct = 0usize;

        for (batch_index, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads = model.params.zeros_like();
            let mut batch_loss = 0.0;
            for &i in batch {
                let (sequence, label) = &data[i];
                let tape = model.forward_tape(&sequence.frames);
                let target = if *label == Label::Correct { 1.0 } else { 0.0 };
                let (loss, d_logit) = bce_from_logit(tape.logit, target);
                if !loss.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite loss at epoch {epoch}, batch {batch_index}"
                    )));
                }
                let sample_grads = model.backward_tape(&tape, d_logit);
                grads.add_scaled(&sample_grads, 1.0);
                batch_loss += loss;
                let predicted_correct = tape.logit >= 0.0;
                if predicted_correct == (*label == Label::Correct) {
                    epoch_correct += 1;
                }
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.update(&mut model.params, &grads, learning_rate);
            epoch_loss += batch_loss;
        }

        model.training_history.push(TrainingEpoch {
            epoch,
            loss: epoch_loss / n as f64,
            accuracy: epoch_correct as f64 / n as f64,
        });
    }

    Ok(model)
}
