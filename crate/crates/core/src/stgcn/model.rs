//! The assembled classifier: ST-conv blocks, joint pooling, LSTM and logit
//! head, plus persistence.

use ndarray::{Array1, Array2, Array3, ArrayViewD, ArrayViewMutD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::graph::{build_normalized_adjacency, SkeletonGraph};
use crate::skeleton::sequence::{Label, MotionSequence};
use crate::stgcn::config::StgcnConfig;
use crate::stgcn::layers::{
    pool_joints, pool_joints_backward, relu_backward, relu_forward, sigmoid, AffineHead,
    LstmCache, LstmLayer, SgcCache, SpatialGraphConv, TemporalGatedConv, TgcCache,
};

/// One block's parameters: temporal conv in, spatial graph conv, temporal
/// conv out. ReLU follows the spatial convolution.
#[derive(Debug, Clone)]
pub struct BlockParams {
    pub temporal_in: TemporalGatedConv,
    pub spatial: SpatialGraphConv,
    pub temporal_out: TemporalGatedConv,
}

#[derive(Debug, Clone)]
pub struct StgcnParams {
    pub blocks: Vec<BlockParams>,
    pub lstm: LstmLayer,
    pub head: AffineHead,
}

impl StgcnParams {
    pub fn init(config: &StgcnConfig, rng: &mut ChaCha8Rng) -> StgcnParams {
        let blocks = config
            .blocks
            .iter()
            .map(|spec| BlockParams {
                temporal_in: TemporalGatedConv::init(
                    spec.temporal_kernel_size,
                    spec.in_channels,
                    spec.spatial_channels,
                    rng,
                ),
                spatial: SpatialGraphConv::init(spec.spatial_channels, spec.spatial_channels, rng),
                temporal_out: TemporalGatedConv::init(
                    spec.temporal_kernel_size,
                    spec.spatial_channels,
                    spec.out_channels,
                    rng,
                ),
            })
            .collect::<Vec<_>>();
        let last_channels = config.blocks.last().expect("validated config").out_channels;
        let lstm = LstmLayer::init(last_channels, config.lstm_hidden, rng);
        let head = AffineHead::init(config.lstm_hidden, rng);
        StgcnParams { blocks, lstm, head }
    }

    pub fn zeros_like(&self) -> StgcnParams {
        StgcnParams {
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockParams {
                    temporal_in: b.temporal_in.zeros_like(),
                    spatial: b.spatial.zeros_like(),
                    temporal_out: b.temporal_out.zeros_like(),
                })
                .collect(),
            lstm: self.lstm.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    /// Named views of every parameter tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out: Vec<(String, ArrayViewD<'_, f64>)> = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.temporal_in.w_value"), b.temporal_in.w_value.view().into_dyn()));
            out.push((format!("block{i}.temporal_in.b_value"), b.temporal_in.b_value.view().into_dyn()));
            out.push((format!("block{i}.temporal_in.w_gate"), b.temporal_in.w_gate.view().into_dyn()));
            out.push((format!("block{i}.temporal_in.b_gate"), b.temporal_in.b_gate.view().into_dyn()));
            out.push((format!("block{i}.spatial.weight"), b.spatial.weight.view().into_dyn()));
            out.push((format!("block{i}.temporal_out.w_value"), b.temporal_out.w_value.view().into_dyn()));
            out.push((format!("block{i}.temporal_out.b_value"), b.temporal_out.b_value.view().into_dyn()));
            out.push((format!("block{i}.temporal_out.w_gate"), b.temporal_out.w_gate.view().into_dyn()));
            out.push((format!("block{i}.temporal_out.b_gate"), b.temporal_out.b_gate.view().into_dyn()));
        }
        out.push(("lstm.w_input".into(), self.lstm.w_input.view().into_dyn()));
        out.push(("lstm.w_hidden".into(), self.lstm.w_hidden.view().into_dyn()));
        out.push(("lstm.bias".into(), self.lstm.bias.view().into_dyn()));
        out.push(("head.weight".into(), self.head.weight.view().into_dyn()));
        out.push(("head.bias".into(), self.head.bias.view().into_dyn()));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out: Vec<(String, ArrayViewMutD<'_, f64>)> = Vec::new();
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.push((format!("block{i}.temporal_in.w_value"), b.temporal_in.w_value.view_mut().into_dyn()));
            out.push((format!("block{i}.temporal_in.b_value"), b.temporal_in.b_value.view_mut().into_dyn()));
            out.push((format!("block{i}.temporal_in.w_gate"), b.temporal_in.w_gate.view_mut().into_dyn()));
            out.push((format!("block{i}.temporal_in.b_gate"), b.temporal_in.b_gate.view_mut().into_dyn()));
            out.push((format!("block{i}.spatial.weight"), b.spatial.weight.view_mut().into_dyn()));
            out.push((format!("block{i}.temporal_out.w_value"), b.temporal_out.w_value.view_mut().into_dyn()));
            out.push((format!("block{i}.temporal_out.b_value"), b.temporal_out.b_value.view_mut().into_dyn()));
            out.push((format!("block{i}.temporal_out.w_gate"), b.temporal_out.w_gate.view_mut().into_dyn()));
            out.push((format!("block{i}.temporal_out.b_gate"), b.temporal_out.b_gate.view_mut().into_dyn()));
        }
        out.push(("lstm.w_input".into(), self.lstm.w_input.view_mut().into_dyn()));
        out.push(("lstm.w_hidden".into(), self.lstm.w_hidden.view_mut().into_dyn()));
        out.push(("lstm.bias".into(), self.lstm.bias.view_mut().into_dyn()));
        out.push(("head.weight".into(), self.head.weight.view_mut().into_dyn()));
        out.push(("head.bias".into(), self.head.bias.view_mut().into_dyn()));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, v)| v.len()).sum()
    }

    /// `self[i] += scale * other[i]` over all parameters.
    pub fn add_scaled(&mut self, other: &StgcnParams, scale: f64) {
        let mut mine = self.tensors_mut();
        let theirs = other.tensors();
        assert_eq!(mine.len(), theirs.len());
        for ((_, a), (_, b)) in mine.iter_mut().zip(theirs.iter()) {
            a.zip_mut_with(b, |x, &y| *x += scale * y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, mut v) in self.tensors_mut() {
            v.mapv_inplace(|x| x * factor);
        }
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingEpoch {
    pub epoch: usize,
    /// Mean binary cross-entropy over all training sequences.
    pub loss: f64,
    /// Training accuracy at a 0.5 probability cutoff.
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct StgcnModel {
    pub config: StgcnConfig,
    pub graph: SkeletonGraph,
    pub adjacency: Array2<f64>,
    pub params: StgcnParams,
    pub training_history: Vec<TrainingEpoch>,
}

pub(crate) struct BlockTape {
    tgc_in: TgcCache,
    sgc: SgcCache,
    relu_mask: Array3<f64>,
    tgc_out: TgcCache,
}

pub(crate) struct ForwardTape {
    blocks: Vec<BlockTape>,
    /// Joint count entering the pooling step.
    joints: usize,
    lstm: LstmCache,
    h_last: Array1<f64>,
    pub logit: f64,
}

impl StgcnModel {
    /// Fresh model with seeded initialization (from `config.seed`).
    pub fn new(config: StgcnConfig, graph: SkeletonGraph) -> Result<StgcnModel> {
        config.validate(&graph)?;
        let adjacency = build_normalized_adjacency(&graph)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = StgcnParams::init(&config, &mut rng);
        Ok(StgcnModel {
            config,
            graph,
            adjacency,
            params,
            training_history: Vec::new(),
        })
    }

    /// Checks a sequence against the model's expected input shape.
    pub fn check_input(&self, sequence: &MotionSequence) -> Result<()> {
        if sequence.format != self.graph.format_id {
            return Err(Error::Schema(format!(
                "sequence format {} does not match model format {}",
                sequence.format, self.graph.format_id
            )));
        }
        if sequence.joint_count() != self.graph.joint_count
            || sequence.dimensionality() != self.graph.dimensionality
        {
            return Err(Error::Schema(format!(
                "sequence is {} joints x {} coords, model expects {} x {}",
                sequence.joint_count(),
                sequence.dimensionality(),
                self.graph.joint_count,
                self.graph.dimensionality
            )));
        }
        if sequence.len() != self.config.input_length {
            return Err(Error::Schema(format!(
                "sequence has {} frames, model expects {} (resample first)",
                sequence.len(),
                self.config.input_length
            )));
        }
        Ok(())
    }

    pub(crate) fn forward_tape(&self, input: &Array3<f64>) -> ForwardTape {
        let mut x = input.clone();
        let mut blocks = Vec::with_capacity(self.params.blocks.len());
        for block in &self.params.blocks {
            let (a, tgc_in) = block.temporal_in.forward(&x);
            let (s, sgc) = block.spatial.forward(&a, &self.adjacency);
            let (r, relu_mask) = relu_forward(&s);
            let (out, tgc_out) = block.temporal_out.forward(&r);
            blocks.push(BlockTape { tgc_in, sgc, relu_mask, tgc_out });
            x = out;
        }
        let joints = x.dim().1;
        let pooled = pool_joints(&x);
        let (h_last, lstm) = self.params.lstm.forward(&pooled);
        let logit = self.params.head.forward(&h_last);
        ForwardTape { blocks, joints, lstm, h_last, logit }
    }

    /// Gradients of a scalar loss with respect to every parameter, given
    /// `d loss / d logit`.
    pub(crate) fn backward_tape(&self, tape: &ForwardTape, d_logit: f64) -> StgcnParams {
        let mut grads = StgcnParams {
            blocks: Vec::with_capacity(self.params.blocks.len()),
            lstm: self.params.lstm.zeros_like(),
            head: self.params.head.zeros_like(),
        };

        let (head_grads, d_h) = self.params.head.backward(&tape.h_last, d_logit);
        grads.head = head_grads;
        let (lstm_grads, d_pooled) = self.params.lstm.backward(&tape.lstm, &d_h);
        grads.lstm = lstm_grads;

        let mut d_x = pool_joints_backward(&d_pooled, tape.joints);
        let mut block_grads = Vec::with_capacity(self.params.blocks.len());
        for (block, tape_b) in self.params.blocks.iter().zip(&tape.blocks).rev() {
            let (g_out, d_r) = block.temporal_out.backward(&tape_b.tgc_out, &d_x);
            let d_s = relu_backward(&tape_b.relu_mask, &d_r);
            let (g_sp, d_a) = block.spatial.backward(&tape_b.sgc, &self.adjacency, &d_s);
            let (g_in, d_input) = block.temporal_in.backward(&tape_b.tgc_in, &d_a);
            block_grads.push(BlockParams {
                temporal_in: g_in,
                spatial: g_sp,
                temporal_out: g_out,
            });
            d_x = d_input;
        }
        block_grads.reverse();
        grads.blocks = block_grads;
        grads
    }

    /// Probability that the sequence is a correct execution.
    pub fn forward(&self, sequence: &MotionSequence) -> Result<f64> {
        self.check_input(sequence)?;
        let tape = self.forward_tape(&sequence.frames);
        let p = sigmoid(tape.logit);
        if !p.is_finite() {
            return Err(Error::Numerical(format!("non-finite probability {p}")));
        }
        Ok(p)
    }

    /// Hard decision at probability 0.5.
    pub fn predict(&self, sequence: &MotionSequence) -> Result<Label> {
        Ok(if self.forward(sequence)? >= 0.5 {
            Label::Correct
        } else {
            Label::Incorrect
        })
    }

    // ── Persistence ─────────────────────────────────────────────────────

    pub fn to_json(&self) -> Vec<u8> {
        let tensors = self
            .params
            .tensors()
            .into_iter()
            .map(|(name, view)| TensorDoc {
                name,
                shape: view.shape().to_vec(),
                data: view.iter().copied().collect(),
            })
            .collect();
        let doc = StgcnModelDoc {
            kind: "stgcn_classifier".into(),
            config: self.config.clone(),
            graph: self.graph.clone(),
            tensors,
            training_history: self.training_history.clone(),
        };
        serde_json::to_vec_pretty(&doc).expect("model serialization")
    }

    pub fn from_json(bytes: &[u8]) -> Result<StgcnModel> {
        let doc: StgcnModelDoc = serde_json::from_slice(bytes)
            .map_err(|e| Error::Parse(format!("classifier document: {e}")))?;
        if doc.kind != "stgcn_classifier" {
            return Err(Error::Schema(format!(
                "document kind {:?} is not a classifier",
                doc.kind
            )));
        }
        let mut model = StgcnModel::new(doc.config, doc.graph)?;
        let mut by_name: std::collections::HashMap<String, TensorDoc> =
            doc.tensors.into_iter().map(|t| (t.name.clone(), t)).collect();
        for (name, mut view) in model.params.tensors_mut() {
            let tensor = by_name.remove(&name).ok_or_else(|| {
                Error::Schema(format!("model document is missing tensor {name:?}"))
            })?;
            if tensor.shape != view.shape() {
                return Err(Error::Schema(format!(
                    "tensor {name:?} has shape {:?}, expected {:?}",
                    tensor.shape,
                    view.shape()
                )));
            }
            if tensor.data.len() != view.len() {
                return Err(Error::Schema(format!(
                    "tensor {name:?} has {} values for shape {:?}",
                    tensor.data.len(),
                    tensor.shape
                )));
            }
            for (slot, value) in view.iter_mut().zip(tensor.data) {
                *slot = value;
            }
        }
        if let Some(extra) = by_name.keys().next() {
            return Err(Error::Schema(format!(
                "model document has unexpected tensor {extra:?}"
            )));
        }
        model.training_history = doc.training_history;
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<StgcnModel> {
        let bytes = std::fs::read(path)?;
        StgcnModel::from_json(&bytes)
    }
}

#[derive(Serialize, Deserialize)]
struct TensorDoc {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StgcnModelDoc {
    kind: String,
    config: StgcnConfig,
    graph: SkeletonGraph,
    tensors: Vec<TensorDoc>,
    training_history: Vec<TrainingEpoch>,
}
