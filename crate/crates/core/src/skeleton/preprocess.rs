//! Sequence preprocessing: temporal resampling, root centering and scale
//! normalization, plus the flattening used by the movement model.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::graph::SkeletonGraph;
use crate::skeleton::sequence::MotionSequence;

fn default_target_length() -> usize {
    100
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Number of frames after linear resampling.
    #[serde(default = "default_target_length")]
    pub target_length: usize,
    /// Subtract the root joint position from every joint, per frame.
    #[serde(default = "default_true")]
    pub center_on_root: bool,
    /// Divide all coordinates by the mean torso length.
    #[serde(default = "default_true")]
    pub scale_normalize: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            target_length: default_target_length(),
            center_on_root: true,
            scale_normalize: true,
        }
    }
}

/// A torso shorter than this is treated as degenerate rather than used as a
/// scale unit.
const MIN_TORSO_LENGTH: f64 = 1e-9;

/// Resamples to `target_length` frames on a uniform time grid, rescales
/// timestamps to `[0, 1]`, then optionally centers on the root joint and
/// normalizes scale by the mean torso length.
///
/// The operation is idempotent: running it twice with the same config gives
/// the same sequence up to floating-point roundoff.
pub fn preprocess(
    sequence: &MotionSequence,
    graph: &SkeletonGraph,
    config: &PreprocessConfig,
) -> Result<MotionSequence> {
    sequence.validate(graph)?;
    if config.target_length < 2 {
        return Err(Error::Config(format!(
            "target_length must be at least 2, got {}",
            config.target_length
        )));
    }

    let mut out = resample(sequence, config.target_length);

    if config.center_on_root {
        let (t, j, d) = (out.len(), out.joint_count(), out.dimensionality());
        for ti in 0..t {
            let root: Vec<f64> = (0..d).map(|di| out.frames[[ti, graph.root_joint, di]]).collect();
            for ji in 0..j {
                for di in 0..d {
                    out.frames[[ti, ji, di]] -= root[di];
                }
            }
        }
    }

    if config.scale_normalize {
        let t = out.len();
        let mean_torso = (0..t)
            .map(|ti| graph.torso_length(out.frames.index_axis(ndarray::Axis(0), ti)))
            .sum::<f64>()
            / t as f64;
        if !mean_torso.is_finite() || mean_torso < MIN_TORSO_LENGTH {
            return Err(Error::Data(format!(
                "degenerate sequence: mean torso length {mean_torso} is too small to normalize by"
            )));
        }
        out.frames.mapv_inplace(|v| v / mean_torso);
    }

    Ok(out)
}

/// Linear resampling onto a uniform grid spanning the original time range,
/// with timestamps rescaled to `[0, 1]`.
fn resample(sequence: &MotionSequence, target_length: usize) -> MotionSequence {
    let t = sequence.len();
    let (j, d) = (sequence.joint_count(), sequence.dimensionality());
    let t0 = sequence.timestamps[0];
    let t_end = sequence.timestamps[t - 1];
    let span = t_end - t0;
    let l = target_length;

    let mut frames = Array3::<f64>::zeros((l, j, d));
    let mut segment = 0usize; // index of the left knot of the current segment
    for i in 0..l {
        let u = t0 + span * (i as f64 / (l - 1) as f64);
        // Advance to the segment containing u; u is nondecreasing in i.
        while segment + 2 < t && sequence.timestamps[segment + 1] <= u {
            segment += 1;
        }
        let (left, right) = (sequence.timestamps[segment], sequence.timestamps[segment + 1]);
        let alpha = ((u - left) / (right - left)).clamp(0.0, 1.0);
        for ji in 0..j {
            for di in 0..d {
                let a = sequence.frames[[segment, ji, di]];
                let b = sequence.frames[[segment + 1, ji, di]];
                frames[[i, ji, di]] = a + alpha * (b - a);
            }
        }
    }

    let timestamps = (0..l).map(|i| i as f64 / (l - 1) as f64).collect();
    MotionSequence {
        frames,
        timestamps,
        format: sequence.format,
        exercise_id: sequence.exercise_id.clone(),
        subject_id: sequence.subject_id.clone(),
        label: sequence.label,
        annotations: sequence.annotations.clone(),
    }
}

/// Flattens a sequence into the movement model's observation matrix: one row
/// per frame, `[timestamp, x_0, y_0, (z_0,) x_1, ...]` in joint-major order.
pub fn to_gmm_datapoints(sequence: &MotionSequence) -> Array2<f64> {
    let (t, j, d) = (
        sequence.len(),
        sequence.joint_count(),
        sequence.dimensionality(),
    );
    let width = 1 + j * d;
    let mut points = Array2::<f64>::zeros((t, width));
    for ti in 0..t {
        points[[ti, 0]] = sequence.timestamps[ti];
        for ji in 0..j {
            for di in 0..d {
                points[[ti, 1 + ji * d + di]] = sequence.frames[[ti, ji, di]];
            }
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::graph::FormatId;
    use ndarray::array;

    fn sequence(frames: Array3<f64>, timestamps: Vec<f64>) -> MotionSequence {
        MotionSequence {
            frames,
            timestamps,
            format: FormatId::Custom,
            exercise_id: "e".into(),
            subject_id: "s".into(),
            label: None,
            annotations: None,
        }
    }

    fn chain2() -> SkeletonGraph {
        SkeletonGraph::chain(2, 2).unwrap()
    }

    // Inverse of to_gmm_datapoints, written independently as a test oracle.
    fn datapoints_to_frames(points: &Array2<f64>, j: usize, d: usize) -> Array3<f64> {
        let t = points.nrows();
        let mut frames = Array3::<f64>::zeros((t, j, d));
        for ti in 0..t {
            for col in 1..points.ncols() {
                let flat = col - 1;
                frames[[ti, flat / d, flat % d]] = points[[ti, col]];
            }
        }
        frames
    }

    #[test]
    fn resample_two_to_three_hits_midpoint() {
        let frames = ndarray::stack![
            ndarray::Axis(0),
            array![[0.0, 0.0], [2.0, 4.0]],
            array![[1.0, 2.0], [4.0, 8.0]]
        ];
        let seq = sequence(frames, vec![0.0, 1.0]);
        let cfg = PreprocessConfig {
            target_length: 3,
            center_on_root: false,
            scale_normalize: false,
        };
        let out = preprocess(&seq, &chain2(), &cfg).unwrap();
        assert_eq!(out.timestamps, vec![0.0, 0.5, 1.0]);
        assert_eq!(out.frames[[1, 0, 0]], 0.5);
        assert_eq!(out.frames[[1, 0, 1]], 1.0);
        assert_eq!(out.frames[[1, 1, 0]], 3.0);
        assert_eq!(out.frames[[1, 1, 1]], 6.0);
        // Endpoints preserved exactly.
        assert_eq!(out.frames[[0, 1, 1]], 4.0);
        assert_eq!(out.frames[[2, 1, 1]], 8.0);
    }

    #[test]
    fn nonuniform_timestamps_resampled_onto_uniform_grid() {
        // Value track x(t) = t on joint 1, sampled at irregular times.
        let times = vec![0.0, 0.1, 0.7, 1.0];
        let mut frames = Array3::<f64>::zeros((4, 2, 2));
        for (ti, &t) in times.iter().enumerate() {
            frames[[ti, 1, 0]] = t;
        }
        let seq = sequence(frames, times);
        let cfg = PreprocessConfig {
            target_length: 5,
            center_on_root: false,
            scale_normalize: false,
        };
        let out = preprocess(&seq, &chain2(), &cfg).unwrap();
        for (i, &ts) in out.timestamps.iter().enumerate() {
            assert!((ts - i as f64 / 4.0).abs() < 1e-15);
            assert!((out.frames[[i, 1, 0]] - ts).abs() < 1e-12, "piecewise-linear in t");
        }
    }

    #[test]
    fn centering_zeroes_root_and_scaling_unit_torso() {
        let mut frames = Array3::<f64>::zeros((3, 2, 2));
        for ti in 0..3 {
            frames[[ti, 0, 0]] = 10.0 + ti as f64;
            frames[[ti, 0, 1]] = -5.0;
            frames[[ti, 1, 0]] = 10.0 + ti as f64 + 4.0;
            frames[[ti, 1, 1]] = -5.0 + 3.0;
        }
        let seq = sequence(frames, vec![0.0, 1.0, 2.0]);
        let out = preprocess(&seq, &chain2(), &PreprocessConfig {
            target_length: 3,
            ..Default::default()
        })
        .unwrap();
        for ti in 0..3 {
            assert_eq!(out.frames[[ti, 0, 0]], 0.0);
            assert_eq!(out.frames[[ti, 0, 1]], 0.0);
            let len = (out.frames[[ti, 1, 0]].powi(2) + out.frames[[ti, 1, 1]].powi(2)).sqrt();
            assert!((len - 1.0).abs() < 1e-12, "torso length {len}");
        }
    }

    #[test]
    fn preprocess_is_idempotent() {
        let mut frames = Array3::<f64>::zeros((7, 2, 2));
        for ti in 0..7 {
            frames[[ti, 0, 0]] = (ti as f64 * 0.9).sin();
            frames[[ti, 0, 1]] = 2.0 + (ti as f64 * 0.4).cos();
            frames[[ti, 1, 0]] = 1.0 + (ti as f64 * 0.9 + 0.3).sin() * 0.5;
            frames[[ti, 1, 1]] = 4.0 - ti as f64 * 0.1;
        }
        let seq = sequence(frames, vec![0.0, 0.3, 0.45, 0.9, 1.3, 1.35, 2.0]);
        let cfg = PreprocessConfig { target_length: 10, ..Default::default() };
        let graph = chain2();
        let once = preprocess(&seq, &graph, &cfg).unwrap();
        let twice = preprocess(&once, &graph, &cfg).unwrap();
        assert_eq!(once.timestamps, twice.timestamps);
        for (a, b) in once.frames.iter().zip(twice.frames.iter()) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_torso_is_an_error() {
        let frames = Array3::<f64>::zeros((3, 2, 2));
        let seq = sequence(frames, vec![0.0, 1.0, 2.0]);
        let err = preprocess(&seq, &chain2(), &PreprocessConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
        assert!(err.to_string().contains("torso"), "{err}");
    }

    #[test]
    fn gmm_datapoints_layout_and_inverse() {
        let frames = ndarray::stack![
            ndarray::Axis(0),
            array![[1.0], [2.0], [3.0]],
            array![[4.0], [5.0], [6.0]]
        ];
        // 2 frames, 3 joints, 1 coordinate.
        let seq = sequence(frames, vec![0.0, 1.0]);
        let pts = to_gmm_datapoints(&seq);
        assert_eq!(pts.shape(), &[2, 4]);
        assert_eq!(pts.row(0).to_vec(), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(pts.row(1).to_vec(), vec![1.0, 4.0, 5.0, 6.0]);

        let recovered = datapoints_to_frames(&pts, 3, 1);
        assert_eq!(recovered, seq.frames);
    }

    #[test]
    fn gmm_datapoints_joint_major_order() {
        let mut frames = Array3::<f64>::zeros((2, 2, 2));
        frames[[0, 0, 0]] = 10.0;
        frames[[0, 0, 1]] = 11.0;
        frames[[0, 1, 0]] = 20.0;
        frames[[0, 1, 1]] = 21.0;
        let seq = sequence(frames, vec![0.25, 0.75]);
        let pts = to_gmm_datapoints(&seq);
        assert_eq!(pts.row(0).to_vec(), vec![0.25, 10.0, 11.0, 20.0, 21.0]);
        let recovered = datapoints_to_frames(&pts, 2, 2);
        assert_eq!(recovered, seq.frames);
    }
}
