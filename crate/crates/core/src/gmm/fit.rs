//! Expectation-maximization fitting of the movement model.
//!
//! Observations are flattened frames `[t, x_0, y_0, ...]` pooled across the
//! correct executions of one exercise. Each M-step adds `covariance_floor`
//! to every covariance diagonal, which keeps components positive definite on
//! degenerate data at the cost of making the M-step very slightly inexact;
//! the resulting log-likelihood change stays far below the stopping
//! tolerance on reasonably conditioned data.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gmm::density::{log_sum_exp, PreparedGaussian};
use crate::gmm::model::{FitMetadata, GmmComponent, GmmFitConfig, GmmModel, InitMethod};
use crate::skeleton::preprocess::to_gmm_datapoints;
use crate::skeleton::sequence::MotionSequence;

/// Fits a movement model to the pooled frames of `sequences`, which must all
/// belong to one exercise and already be preprocessed.
pub fn fit(sequences: &[MotionSequence], config: &GmmFitConfig) -> Result<GmmModel> {
    if sequences.is_empty() {
        return Err(Error::Data("no sequences to fit".into()));
    }
    let exercise_id = sequences[0].exercise_id.clone();
    if let Some(other) = sequences.iter().find(|s| s.exercise_id != exercise_id) {
        return Err(Error::Data(format!(
            "sequences mix exercises {exercise_id:?} and {:?}",
            other.exercise_id
        )));
    }
    let width = 1 + sequences[0].joint_count() * sequences[0].dimensionality();
    let total: usize = sequences.iter().map(|s| s.len()).sum();
    let mut points = Array2::<f64>::zeros((total, width));
    let mut row = 0;
    for seq in sequences {
        let pts = to_gmm_datapoints(seq);
        if pts.ncols() != width {
            return Err(Error::Schema(format!(
                "sequence for subject {:?} has {} observation columns, expected {width}",
                seq.subject_id,
                pts.ncols()
            )));
        }
        for r in pts.rows() {
            for (c, &v) in r.iter().enumerate() {
                points[[row, c]] = v;
            }
            row += 1;
        }
    }
    fit_points(&points, &exercise_id, config)
}

/// Fits a movement model directly to an observation matrix (one row per
/// frame).
pub fn fit_points(
    points: &Array2<f64>,
    exercise_id: &str,
    config: &GmmFitConfig,
) -> Result<GmmModel> {
    config.validate()?;
    let n = points.nrows();
    let d = points.ncols();
    if n < config.k {
        return Err(Error::Config(format!(
            "cannot fit {} components to {n} observations",
            config.k
        )));
    }
    if let Some(bad) = points.iter().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite observation value {bad}")));
    }

    // Column-major transpose (d x N); all linear algebra runs on this.
    let xt = {
        let mut xt = DMatrix::<f64>::zeros(d, n);
        for i in 0..n {
            for j in 0..d {
                xt[(j, i)] = points[[i, j]];
            }
        }
        xt
    };

    let mut components = match config.init {
        InitMethod::TimeUniform => init_time_uniform(&xt, config),
        InitMethod::Kmeans => init_kmeans(&xt, config),
    }?;

    let k = config.k;
    let mut log_resp = DMatrix::<f64>::zeros(n, k);
    let mut history: Vec<f64> = Vec::new();

    let ll = e_step(&xt, &components, &mut log_resp)
        .map_err(|e| at_iteration(e, 0))?;
    if !ll.is_finite() {
        return Err(Error::Numerical(
            "non-finite log-likelihood at initialization".into(),
        ));
    }
    history.push(ll);

    for iteration in 1..=config.max_iterations {
        m_step(&xt, &log_resp, config.covariance_floor, &mut components);
        let ll = e_step(&xt, &components, &mut log_resp)
            .map_err(|e| at_iteration(e, iteration))?;
        if !ll.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite log-likelihood at iteration {iteration}"
            )));
        }
        let previous = *history.last().expect("history is non-empty");
        history.push(ll);
        if (ll - previous).abs() <= config.tolerance * previous.abs().max(1.0) {
            break;
        }
    }

    let model = GmmModel {
        components,
        dimension: d,
        exercise_id: exercise_id.to_string(),
        fit_config: *config,
        fit_metadata: FitMetadata {
            iterations: history.len() - 1,
            final_log_likelihood: *history.last().expect("history is non-empty"),
            seed: config.seed,
            log_likelihood_history: history,
        },
    };
    model.validate()?;
    Ok(model)
}

fn at_iteration(err: Error, iteration: usize) -> Error {
    match err {
        Error::Numerical(m) => Error::Numerical(format!("iteration {iteration}: {m}")),
        other => other,
    }
}

/// Fills `log_resp` with log posterior responsibilities and returns the total
/// log-likelihood of the data.
fn e_step(
    xt: &DMatrix<f64>,
    components: &[GmmComponent],
    log_resp: &mut DMatrix<f64>,
) -> Result<f64> {
    let n = xt.ncols();
    let k = components.len();
    for (i, component) in components.iter().enumerate() {
        let prepared = PreparedGaussian::new(component.mean.clone(), &component.covariance)
            .ok_or_else(|| {
                Error::Numerical(format!(
                    "component {i}: covariance is not positive definite"
                ))
            })?;
        let log_weight = component.weight.ln();
        let mut centered = xt.clone();
        for mut col in centered.column_iter_mut() {
            col -= &prepared.mean;
        }
        let z = prepared
            .solve_lower(&centered)
            .ok_or_else(|| Error::Numerical(format!("component {i}: singular factor")))?;
        for p in 0..n {
            log_resp[(p, i)] = log_weight + prepared.log_norm() - 0.5 * z.column(p).norm_squared();
        }
    }

    let mut total = 0.0;
    let mut row_buf = vec![0.0; k];
    for p in 0..n {
        for i in 0..k {
            row_buf[i] = log_resp[(p, i)];
        }
        let lse = log_sum_exp(&row_buf);
        total += lse;
        for i in 0..k {
            log_resp[(p, i)] -= lse;
        }
    }
    Ok(total)
}

fn m_step(
    xt: &DMatrix<f64>,
    log_resp: &DMatrix<f64>,
    floor: f64,
    components: &mut [GmmComponent],
) {
    let n = xt.ncols();
    let d = xt.nrows();
    for (i, component) in components.iter_mut().enumerate() {
        let resp = DVector::<f64>::from_fn(n, |p, _| log_resp[(p, i)].exp());
        let mass: f64 = resp.sum();
        // With a positive floor the densities never collapse to a point, so
        // responsibilities stay strictly positive; guard regardless.
        let mass = mass.max(f64::MIN_POSITIVE);
        component.weight = mass / n as f64;
        let mean = xt * &resp / mass;
        let mut centered = xt.clone();
        for (p, mut col) in centered.column_iter_mut().enumerate() {
            col -= &mean;
            col *= resp[p].sqrt();
        }
        let mut cov = &centered * centered.transpose() / mass;
        for r in 0..d {
            cov[(r, r)] += floor;
        }
        component.mean = mean;
        component.covariance = cov;
    }
}

// ── Initialization ──────────────────────────────────────────────────────────

/// Mean/ML-covariance/weight of a group of observation columns.
fn component_from_group(xt: &DMatrix<f64>, group: &[usize], n_total: usize, floor: f64) -> GmmComponent {
    let d = xt.nrows();
    let m = group.len();
    let mut mean = DVector::<f64>::zeros(d);
    for &p in group {
        mean += xt.column(p);
    }
    mean /= m as f64;
    let mut centered = DMatrix::<f64>::zeros(d, m);
    for (k, &p) in group.iter().enumerate() {
        centered.set_column(k, &(xt.column(p) - &mean));
    }
    let mut cov = &centered * centered.transpose() / m as f64;
    for r in 0..d {
        cov[(r, r)] += floor;
    }
    GmmComponent {
        weight: m as f64 / n_total as f64,
        mean,
        covariance: cov,
    }
}

/// Orders observations by their time coordinate and assigns K contiguous,
/// nearly equal chunks. Exploits the fact that each mixture component of a
/// movement model covers a phase of the exercise.
fn init_time_uniform(xt: &DMatrix<f64>, config: &GmmFitConfig) -> Result<Vec<GmmComponent>> {
    let n = xt.ncols();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        xt[(0, a)]
            .partial_cmp(&xt[(0, b)])
            .expect("finite timestamps")
            .then(a.cmp(&b))
    });
    let k = config.k;
    let mut components = Vec::with_capacity(k);
    for c in 0..k {
        let start = c * n / k;
        let end = (c + 1) * n / k;
        let group = &order[start..end];
        components.push(component_from_group(xt, group, n, config.covariance_floor));
    }
    Ok(components)
}

/// Seeded k-means++ plus Lloyd iterations; clusters become components.
fn init_kmeans(xt: &DMatrix<f64>, config: &GmmFitConfig) -> Result<Vec<GmmComponent>> {
    let n = xt.ncols();
    let k = config.k;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // k-means++ seeding.
    let mut centers: Vec<DVector<f64>> = Vec::with_capacity(k);
    centers.push(xt.column(rng.random_range(0..n)).into_owned());
    let mut dist2: Vec<f64> = (0..n)
        .map(|p| (xt.column(p) - &centers[0]).norm_squared())
        .collect();
    while centers.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (p, &w) in dist2.iter().enumerate() {
                if u < w {
                    chosen = p;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            // All points coincide with some center; spread deterministically.
            centers.len() % n
        };
        centers.push(xt.column(next).into_owned());
        for p in 0..n {
            dist2[p] = dist2[p].min((xt.column(p) - centers.last().unwrap()).norm_squared());
        }
    }

    let mut assignment = vec![0usize; n];
    for _round in 0..25 {
        let mut changed = false;
        for p in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d2 = (xt.column(p) - center).norm_squared();
                if d2 < best_d {
                    best_d = d2;
                    best = c;
                }
            }
            if assignment[p] != best {
                assignment[p] = best;
                changed = true;
            }
        }
        // Recompute centers; repair empty clusters by stealing the point
        // farthest from its center.
        let mut counts = vec![0usize; k];
        let mut sums = vec![DVector::<f64>::zeros(xt.nrows()); k];
        for p in 0..n {
            counts[assignment[p]] += 1;
            sums[assignment[p]] += xt.column(p);
        }
        for c in 0..k {
            if counts[c] == 0 {
                let farthest = (0..n)
                    .max_by(|&a, &b| {
                        let da = (xt.column(a) - &centers[assignment[a]]).norm_squared();
                        let db = (xt.column(b) - &centers[assignment[b]]).norm_squared();
                        da.partial_cmp(&db).expect("finite distances").then(a.cmp(&b))
                    })
                    .expect("n >= 1");
                let old = assignment[farthest];
                counts[old] -= 1;
                sums[old] -= xt.column(farthest);
                assignment[farthest] = c;
                counts[c] = 1;
                sums[c] = xt.column(farthest).into_owned();
                changed = true;
            }
        }
        for c in 0..k {
            centers[c] = &sums[c] / counts[c] as f64;
        }
        if !changed {
            break;
        }
    }

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for p in 0..n {
        groups[assignment[p]].push(p);
    }
    Ok(groups
        .iter()
        .map(|group| component_from_group(xt, group, n, config.covariance_floor))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two well-separated blobs along the time axis.
    fn two_blob_points(n_per: usize) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut points = Array2::<f64>::zeros((2 * n_per, 3));
        for i in 0..2 * n_per {
            let blob = if i < n_per { 0.0 } else { 1.0 };
            points[[i, 0]] = blob * 10.0 + rng.random::<f64>();
            points[[i, 1]] = blob * -4.0 + rng.random::<f64>() * 0.5;
            points[[i, 2]] = blob * 2.0 + rng.random::<f64>() * 2.0;
        }
        points
    }

    #[test]
    fn k1_closed_form_mean_and_covariance() {
        let points = two_blob_points(30);
        let n = points.nrows() as f64;
        let config = GmmFitConfig { k: 1, ..Default::default() };
        let model = fit_points(&points, "ex", &config).unwrap();
        assert_eq!(model.components.len(), 1);

        // Oracle: direct sample mean and ML covariance.
        let mut mean = vec![0.0; 3];
        for r in points.rows() {
            for (j, &v) in r.iter().enumerate() {
                mean[j] += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        for j in 0..3 {
            assert!((model.components[0].mean[j] - mean[j]).abs() < 1e-9);
        }
        for a in 0..3 {
            for b in 0..3 {
                let mut s = 0.0;
                for r in points.rows() {
                    s += (r[a] - mean[a]) * (r[b] - mean[b]);
                }
                s /= n;
                if a == b {
                    s += config.covariance_floor;
                }
                assert!(
                    (model.components[0].covariance[(a, b)] - s).abs() < 1e-9,
                    "cov[{a},{b}]"
                );
            }
        }
        assert_eq!(model.components[0].weight, 1.0);
    }

    #[test]
    fn history_is_monotone_and_bounded() {
        let points = two_blob_points(40);
        for init in [InitMethod::TimeUniform, InitMethod::Kmeans] {
            let config = GmmFitConfig { k: 3, init, seed: 5, ..Default::default() };
            let model = fit_points(&points, "ex", &config).unwrap();
            let h = &model.fit_metadata.log_likelihood_history;
            assert!(h.len() >= 2);
            assert!(h.len() <= config.max_iterations + 1);
            for w in h.windows(2) {
                assert!(w[1] >= w[0] - 1e-8, "log-likelihood fell: {} -> {}", w[0], w[1]);
            }
            assert_eq!(model.fit_metadata.iterations, h.len() - 1);
            assert_eq!(model.fit_metadata.final_log_likelihood, *h.last().unwrap());
        }
    }

    #[test]
    fn recovers_separated_clusters() {
        let points = two_blob_points(60);
        let config = GmmFitConfig { k: 2, ..Default::default() };
        let model = fit_points(&points, "ex", &config).unwrap();
        let mut time_means: Vec<f64> = model.components.iter().map(|c| c.mean[0]).collect();
        time_means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((time_means[0] - 0.5).abs() < 0.2, "{time_means:?}");
        assert!((time_means[1] - 10.5).abs() < 0.2, "{time_means:?}");
        let weight_sum: f64 = model.components.iter().map(|c| c.weight).sum();
        assert!((weight_sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_model() {
        let points = two_blob_points(25);
        let config = GmmFitConfig { k: 4, init: InitMethod::Kmeans, seed: 42, ..Default::default() };
        let a = fit_points(&points, "ex", &config).unwrap();
        let b = fit_points(&points, "ex", &config).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn too_many_components_is_config_error() {
        let points = two_blob_points(2); // 4 observations
        let config = GmmFitConfig { k: 5, ..Default::default() };
        let err = fit_points(&points, "ex", &config).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn non_finite_observations_rejected() {
        let mut points = two_blob_points(5);
        points[[3, 1]] = f64::NAN;
        let err = fit_points(&points, "ex", &GmmFitConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
    }

    #[test]
    fn mixed_exercises_rejected() {
        use crate::skeleton::graph::FormatId;
        use ndarray::Array3;
        let mk = |ex: &str| MotionSequence {
            frames: Array3::zeros((3, 2, 2)),
            timestamps: vec![0.0, 0.5, 1.0],
            format: FormatId::Custom,
            exercise_id: ex.into(),
            subject_id: "s".into(),
            label: None,
            annotations: None,
        };
        let err = fit(&[mk("a"), mk("b")], &GmmFitConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
    }

    #[test]
    fn duplicate_points_stay_fittable_via_floor() {
        // 12 identical observations: covariance would be singular without
        // the floor.
        let mut points = Array2::<f64>::zeros((12, 3));
        for i in 0..12 {
            points[[i, 0]] = 0.5;
            points[[i, 1]] = 1.0;
            points[[i, 2]] = -2.0;
        }
        let config = GmmFitConfig { k: 2, ..Default::default() };
        let model = fit_points(&points, "ex", &config).unwrap();
        model.validate().unwrap();
    }
}
