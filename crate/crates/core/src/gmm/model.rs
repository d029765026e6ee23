//! Gaussian mixture movement model: in-memory form and persistence.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::density::PreparedGaussian;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    /// Split the time axis into K contiguous chunks and fit one component
    /// to each.
    TimeUniform,
    /// Seeded k-means assignment, one component per cluster.
    Kmeans,
}

fn default_k() -> usize {
    8
}
fn default_max_iterations() -> usize {
    200
}
fn default_tolerance() -> f64 {
    1e-6
}
fn default_covariance_floor() -> f64 {
    1e-6
}
fn default_init() -> InitMethod {
    InitMethod::TimeUniform
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmFitConfig {
    /// Number of mixture components.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Relative log-likelihood change below which EM stops.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Value added to every covariance diagonal after each M-step.
    #[serde(default = "default_covariance_floor")]
    pub covariance_floor: f64,
    #[serde(default = "default_init")]
    pub init: InitMethod,
    #[serde(default)]
    pub seed: u64,
}

impl Default for GmmFitConfig {
    fn default() -> Self {
        GmmFitConfig {
            k: default_k(),
            max_iterations: default_max_iterations(),
            tolerance: default_tolerance(),
            covariance_floor: default_covariance_floor(),
            init: default_init(),
            seed: 0,
        }
    }
}

impl GmmFitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be finite and non-negative, got {}",
                self.tolerance
            )));
        }
        if !(self.covariance_floor.is_finite() && self.covariance_floor > 0.0) {
            return Err(Error::Config(format!(
                "covariance_floor must be positive, got {}",
                self.covariance_floor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    /// Number of completed EM iterations (M-steps).
    pub iterations: usize,
    pub final_log_likelihood: f64,
    pub seed: u64,
    /// Total training log-likelihood after initialization and after each
    /// iteration; length `iterations + 1`.
    pub log_likelihood_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GmmModel {
    pub components: Vec<GmmComponent>,
    /// Observation dimension: 1 + joints x coordinates.
    pub dimension: usize,
    pub exercise_id: String,
    pub fit_config: GmmFitConfig,
    pub fit_metadata: FitMetadata,
}

impl GmmModel {
    /// Structural and numerical validity: weights form a distribution, means
    /// are finite, and each covariance is symmetric and stays positive
    /// definite with half the configured floor removed (so validity is not
    /// an artifact of the floor itself sitting exactly at the SPD boundary).
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Schema("model has no components".into()));
        }
        let weight_sum: f64 = self.components.iter().map(|c| c.weight).sum();
        if (weight_sum - 1.0).abs() > 1e-9 {
            return Err(Error::Numerical(format!(
                "component weights sum to {weight_sum}, expected 1"
            )));
        }
        let d = self.dimension;
        for (i, component) in self.components.iter().enumerate() {
            if !(component.weight.is_finite() && component.weight > 0.0) {
                return Err(Error::Numerical(format!(
                    "component {i}: weight {} is not in (0, 1]",
                    component.weight
                )));
            }
            if component.mean.len() != d {
                return Err(Error::Schema(format!(
                    "component {i}: mean has dimension {}, expected {d}",
                    component.mean.len()
                )));
            }
            if component.covariance.nrows() != d || component.covariance.ncols() != d {
                return Err(Error::Schema(format!(
                    "component {i}: covariance is {}x{}, expected {d}x{d}",
                    component.covariance.nrows(),
                    component.covariance.ncols()
                )));
            }
            if component.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("component {i}: non-finite mean")));
            }
            for r in 0..d {
                for c in 0..r {
                    let a = component.covariance[(r, c)];
                    let b = component.covariance[(c, r)];
                    if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                        return Err(Error::Numerical(format!(
                            "component {i}: covariance asymmetric at ({r}, {c})"
                        )));
                    }
                }
            }
            let mut shifted = component.covariance.clone();
            let margin = 0.5 * self.fit_config.covariance_floor;
            for r in 0..d {
                shifted[(r, r)] -= margin;
            }
            if PreparedGaussian::new(component.mean.clone(), &shifted).is_none() {
                return Err(Error::Numerical(format!(
                    "component {i}: covariance is not positive definite above the floor"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn prepared(&self) -> Result<Vec<(f64, PreparedGaussian)>> {
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let prepared =
                    PreparedGaussian::new(c.mean.clone(), &c.covariance).ok_or_else(|| {
                        Error::Numerical(format!(
                            "component {i}: covariance is not positive definite"
                        ))
                    })?;
                Ok((c.weight.ln(), prepared))
            })
            .collect()
    }

    // ── Persistence ─────────────────────────────────────────────────────

    pub fn to_json(&self) -> Vec<u8> {
        let doc = GmmModelDoc {
            kind: "gmm_movement_model".into(),
            k: self.components.len(),
            dimension: self.dimension,
            exercise_id: self.exercise_id.clone(),
            weights: self.components.iter().map(|c| c.weight).collect(),
            means: self
                .components
                .iter()
                .map(|c| c.mean.iter().copied().collect())
                .collect(),
            // Row-major covariance entries.
            covariances: self
                .components
                .iter()
                .map(|c| {
                    let d = self.dimension;
                    let mut flat = Vec::with_capacity(d * d);
                    for r in 0..d {
                        for col in 0..d {
                            flat.push(c.covariance[(r, col)]);
                        }
                    }
                    flat
                })
                .collect(),
            fit_config: self.fit_config,
            fit_metadata: self.fit_metadata.clone(),
        };
        serde_json::to_vec_pretty(&doc).expect("model serialization")
    }

    pub fn from_json(bytes: &[u8]) -> Result<GmmModel> {
        let doc: GmmModelDoc = serde_json::from_slice(bytes)
            .map_err(|e| Error::Parse(format!("movement model document: {e}")))?;
        if doc.kind != "gmm_movement_model" {
            return Err(Error::Schema(format!(
                "document kind {:?} is not a movement model",
                doc.kind
            )));
        }
        let d = doc.dimension;
        if doc.weights.len() != doc.k || doc.means.len() != doc.k || doc.covariances.len() != doc.k
        {
            return Err(Error::Schema(format!(
                "component count mismatch: k={} but {} weights, {} means, {} covariances",
                doc.k,
                doc.weights.len(),
                doc.means.len(),
                doc.covariances.len()
            )));
        }
        let mut components = Vec::with_capacity(doc.k);
        for i in 0..doc.k {
            if doc.means[i].len() != d {
                return Err(Error::Schema(format!(
                    "component {i}: mean has {} entries, expected {d}",
                    doc.means[i].len()
                )));
            }
            if doc.covariances[i].len() != d * d {
                return Err(Error::Schema(format!(
                    "component {i}: covariance has {} entries, expected {}",
                    doc.covariances[i].len(),
                    d * d
                )));
            }
            components.push(GmmComponent {
                weight: doc.weights[i],
                mean: DVector::from_vec(doc.means[i].clone()),
                covariance: DMatrix::from_row_slice(d, d, &doc.covariances[i]),
            });
        }
        let model = GmmModel {
            components,
            dimension: d,
            exercise_id: doc.exercise_id,
            fit_config: doc.fit_config,
            fit_metadata: doc.fit_metadata,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<GmmModel> {
        let bytes = std::fs::read(path)?;
        GmmModel::from_json(&bytes)
    }
}

#[derive(Serialize, Deserialize)]
struct GmmModelDoc {
    kind: String,
    k: usize,
    dimension: usize,
    exercise_id: String,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<f64>>,
    fit_config: GmmFitConfig,
    fit_metadata: FitMetadata,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> GmmModel {
        GmmModel {
            components: vec![
                GmmComponent {
                    weight: 0.25,
                    mean: DVector::from_vec(vec![0.1, -0.2]),
                    covariance: DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]),
                },
                GmmComponent {
                    weight: 0.75,
                    mean: DVector::from_vec(vec![1.0, 1.0]),
                    covariance: DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]),
                },
            ],
            dimension: 2,
            exercise_id: "ex1".into(),
            fit_config: GmmFitConfig { k: 2, ..Default::default() },
            fit_metadata: FitMetadata {
                iterations: 3,
                final_log_likelihood: -12.5,
                seed: 9,
                log_likelihood_history: vec![-20.0, -15.0, -13.0, -12.5],
            },
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let model = tiny_model();
        let bytes = model.to_json();
        let loaded = GmmModel::from_json(&bytes).unwrap();
        assert_eq!(loaded.components.len(), 2);
        assert_eq!(loaded.components[0].mean, model.components[0].mean);
        assert_eq!(loaded.components[1].covariance, model.components[1].covariance);
        assert_eq!(loaded.fit_metadata, model.fit_metadata);
        assert_eq!(loaded.exercise_id, model.exercise_id);
    }

    #[test]
    fn validate_rejects_bad_weights() {
        let mut model = tiny_model();
        model.components[0].weight = 0.5;
        let err = model.validate().unwrap_err();
        assert!(matches!(err, Error::Numerical(_)), "{err}");
    }

    #[test]
    fn validate_rejects_asymmetric_covariance() {
        let mut model = tiny_model();
        model.components[0].covariance[(0, 1)] = 0.31;
        assert!(model.validate().is_err());
    }

    #[test]
    fn validate_rejects_non_spd_covariance() {
        let mut model = tiny_model();
        model.components[0].covariance =
            DMatrix::from_row_slice(2, 2, &[1.0, 1.5, 1.5, 1.0]);
        let err = model.validate().unwrap_err();
        assert!(matches!(err, Error::Numerical(_)), "{err}");
    }

    #[test]
    fn corrupt_document_is_parse_error() {
        let err = GmmModel::from_json(b"{not json").unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "{err}");
    }

    #[test]
    fn wrong_kind_is_schema_error() {
        let mut doc: serde_json::Value =
            serde_json::from_slice(&tiny_model().to_json()).unwrap();
        doc["kind"] = "something_else".into();
        let err = GmmModel::from_json(&serde_json::to_vec(&doc).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }
}
