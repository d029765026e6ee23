//! Synthetic exercise generator.
//!
//! Every sequence is a sum of low-order sinusoids, so trajectories are smooth
//! by construction and the maximum second difference is bounded in closed
//! form. An exercise-level seed stream freezes the movement template (per
//! joint amplitudes, phases, directions); an instance-level stream adds
//! execution-to-execution jitter. Incorrect executions scale the template
//! amplitude on a set of affected joints (reduced or exaggerated range of
//! motion) and add a higher-frequency tremor harmonic.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedMixer;
use crate::skeleton::graph::SkeletonGraph;
use crate::skeleton::manifest::DatasetManifest;
use crate::skeleton::sequence::{serialize_sequence, Label, MotionSequence};

/// Highest harmonic used anywhere (the tremor), in cycles per sequence.
pub const MAX_HARMONIC: f64 = 3.0;

/// Largest instance-jitter amplitude factor.
pub const JITTER_AMPLITUDE_MAX: f64 = 1.08;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    /// Multiplier on the affected joints' template amplitudes. Below 1 is a
    /// reduced range of motion, above 1 an exaggerated one.
    pub amplitude_scale: f64,
    /// Amplitude of the 3-cycle tremor harmonic added to affected joints.
    pub noise_std: f64,
    pub affected_joints: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub graph: SkeletonGraph,
    pub duration_frames: usize,
    pub frames_per_second: f64,
    /// Upper bound on a joint coordinate's template oscillation amplitude.
    pub motion_amplitude: f64,
    /// Rest distance between consecutive chain joints.
    pub joint_spacing: f64,
    pub incorrect: PerturbationSpec,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            graph: SkeletonGraph::chain(5, 3).expect("builtin chain graph"),
            duration_frames: 60,
            frames_per_second: 30.0,
            motion_amplitude: 0.35,
            joint_spacing: 1.4,
            incorrect: PerturbationSpec {
                amplitude_scale: 0.45,
                noise_std: 0.08,
                affected_joints: vec![2, 3, 4],
            },
            seed: 2024,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        if self.duration_frames < 4 {
            return Err(Error::Config(format!(
                "duration_frames must be at least 4, got {}",
                self.duration_frames
            )));
        }
        if !(self.frames_per_second > 0.0) {
            return Err(Error::Config("frames_per_second must be positive".into()));
        }
        if !(self.motion_amplitude > 0.0) {
            return Err(Error::Config("motion_amplitude must be positive".into()));
        }
        if !(self.incorrect.amplitude_scale >= 0.0 && self.incorrect.amplitude_scale.is_finite()) {
            return Err(Error::Config("amplitude_scale must be finite and non-negative".into()));
        }
        if !(self.incorrect.noise_std >= 0.0 && self.incorrect.noise_std.is_finite()) {
            return Err(Error::Config("noise_std must be finite and non-negative".into()));
        }
        // Adjacent joints can approach each other by at most twice the worst
        // coordinate amplitude, so this keeps every bone length positive.
        if 2.0 * self.max_total_amplitude() >= self.joint_spacing {
            return Err(Error::Config(format!(
                "joint_spacing {} must exceed twice the worst-case amplitude {}, or bones can collapse",
                self.joint_spacing,
                self.max_total_amplitude()
            )));
        }
        if self.incorrect.affected_joints.is_empty() {
            return Err(Error::Config("affected_joints must not be empty".into()));
        }
        for &j in &self.incorrect.affected_joints {
            if j >= self.graph.joint_count {
                return Err(Error::Config(format!(
                    "affected joint {j} out of range for {} joints",
                    self.graph.joint_count
                )));
            }
        }
        Ok(())
    }

    /// Worst-case oscillation amplitude of any coordinate, over both labels
    /// and all jitter. Used by the bone-collapse guard and the smoothness
    /// bound.
    pub fn max_total_amplitude(&self) -> f64 {
        let scale = self.incorrect.amplitude_scale.max(1.0);
        self.motion_amplitude * scale * JITTER_AMPLITUDE_MAX + self.incorrect.noise_std
    }
}

/// Movement template for one exercise: per joint, coordinate and harmonic,
/// an amplitude and phase. Harmonic `h` completes `h + 1` cycles.
struct Template {
    /// `[joint][coordinate][harmonic] -> (amplitude, phase)`
    harmonics: Vec<Vec<[(f64, f64); 2]>>,
}

fn exercise_template(spec: &SyntheticSpec, exercise_id: &str) -> Template {
    let mut rng = ChaCha8Rng::seed_from_u64(
        SeedMixer::new(spec.seed)
            .mix_str("exercise")
            .mix_str(exercise_id)
            .finish(),
    );
    let dim = spec.graph.dimensionality;
    let harmonics = (0..spec.graph.joint_count)
        .map(|joint| {
            // The root sways gently; joints further out move more. The
            // fundamental dominates so one sequence looks like one repetition
            // of an exercise.
            let (lo, hi) = if joint == spec.graph.root_joint {
                (0.20, 0.30)
            } else {
                (0.40, 1.00)
            };
            (0..dim)
                .map(|_| {
                    let a1 = spec.motion_amplitude * rng.random_range(lo..hi) * 0.8;
                    let p1 = rng.random_range(0.0..std::f64::consts::TAU);
                    let a2 = spec.motion_amplitude * rng.random_range(0.05..0.20);
                    let p2 = rng.random_range(0.0..std::f64::consts::TAU);
                    [(a1, p1), (a2, p2)]
                })
                .collect()
        })
        .collect();
    Template { harmonics }
}

/// Generates one execution. Pure in all four arguments: the same call always
/// returns the same sequence, independent of call order.
pub fn generate_sequence(
    spec: &SyntheticSpec,
    exercise_id: &str,
    label: Label,
    call_index: u64,
) -> Result<MotionSequence> {
    spec.validate()?;
    let template = exercise_template(spec, exercise_id);
    let mut rng = ChaCha8Rng::seed_from_u64(
        SeedMixer::new(spec.seed)
            .mix_str("instance")
            .mix_str(exercise_id)
            .mix_str(label.as_str())
            .mix_u64(call_index)
            .finish(),
    );

    let frames_len = spec.duration_frames;
    let joints = spec.graph.joint_count;
    let dim = spec.graph.dimensionality;
    let tau = std::f64::consts::TAU;

    // Instance jitter: one phase offset and amplitude factor per joint and
    // coordinate, shared by both harmonics so the motion stays coherent.
    let jitter: Vec<Vec<(f64, f64)>> = (0..joints)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    (
                        rng.random_range(-0.12..0.12),
                        rng.random_range(0.92..JITTER_AMPLITUDE_MAX),
                    )
                })
                .collect()
        })
        .collect();
    // Tremor parameters are drawn for every instance so the draw count does
    // not depend on the label; they only act on incorrect executions.
    let tremor: Vec<Vec<(f64, f64)>> = (0..joints)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    (
                        spec.incorrect.noise_std * rng.random_range(0.6..1.0),
                        rng.random_range(0.0..tau),
                    )
                })
                .collect()
        })
        .collect();

    let mut frames = ndarray::Array3::<f64>::zeros((frames_len, joints, dim));
    for i in 0..frames_len {
        let u = i as f64 / (frames_len - 1) as f64;
        for j in 0..joints {
            let affected = label == Label::Incorrect
                && spec.incorrect.affected_joints.contains(&j);
            for d in 0..dim {
                // Rest pose: a vertical chain hanging below the root.
                let base = if d == 1 {
                    -(spec.joint_spacing * j as f64)
                } else {
                    0.0
                };
                let (dphi, amp_factor) = jitter[j][d];
                let mut x = base;
                for (h, &(a, phi)) in template.harmonics[j][d].iter().enumerate() {
                    let cycles = (h + 1) as f64;
                    let mut a = a * amp_factor;
                    if affected {
                        a *= spec.incorrect.amplitude_scale;
                    }
                    x += a * (tau * cycles * u + phi + dphi).sin();
                }
                if affected {
                    let (ta, tphi) = tremor[j][d];
                    x += ta * (tau * MAX_HARMONIC * u + tphi).sin();
                }
                frames[[i, j, d]] = x;
            }
        }
    }

    let dt = 1.0 / spec.frames_per_second;
    let timestamps = (0..frames_len).map(|i| i as f64 * dt).collect();
    Ok(MotionSequence {
        frames,
        timestamps,
        format: spec.graph.format_id,
        exercise_id: exercise_id.to_string(),
        subject_id: format!("synth{call_index:03}"),
        label: Some(label),
        annotations: None,
    })
}

/// Generates `n_correct` + `n_incorrect` executions per exercise.
pub fn generate_dataset(
    spec: &SyntheticSpec,
    exercise_ids: &[&str],
    n_correct: usize,
    n_incorrect: usize,
) -> Result<Vec<MotionSequence>> {
    let mut out = Vec::with_capacity(exercise_ids.len() * (n_correct + n_incorrect));
    for &exercise_id in exercise_ids {
        for i in 0..n_correct {
            out.push(generate_sequence(spec, exercise_id, Label::Correct, i as u64)?);
        }
        for i in 0..n_incorrect {
            out.push(generate_sequence(spec, exercise_id, Label::Incorrect, i as u64)?);
        }
    }
    Ok(out)
}

/// Writes one JSON document per sequence plus a `manifest.json`, returning
/// the manifest path.
pub fn write_dataset(
    sequences: &[MotionSequence],
    graph: &SkeletonGraph,
    dir: &Path,
) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::with_capacity(sequences.len());
    for (i, seq) in sequences.iter().enumerate() {
        let label = match seq.label {
            Some(l) => l.as_str(),
            None => "unlabeled",
        };
        let name = format!("{}_{label}_{i:03}.json", seq.exercise_id);
        std::fs::write(dir.join(&name), serialize_sequence(seq))?;
        names.push(name);
    }
    let manifest = DatasetManifest {
        sequences: names,
        graph: Some(graph.clone()),
    };
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}
