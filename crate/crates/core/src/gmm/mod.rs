//! Gaussian mixtures: densities, sampling, EM fitting and KL divergences.

mod em;
mod kl;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use em::{fit_em, select_k_by_bic, BicSweep, EmConfig, FitOutcome, FitReport, InitPolicy};
pub use kl::{gauss_kl, mc_kl, symmetric_divergence, variational_kl, Divergence, McEstimate};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Error, PartialEq)]
pub enum GmmError {
    #[error("component weight {0} outside (0, 1]")]
    InvalidWeight(f64),
    #[error("mixture weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("mixture has no components")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("covariance is not symmetric")]
    NotSymmetric,
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("non-finite parameter")]
    NonFinite,
    #[error("need more than k*d = {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("invalid EM configuration: {0}")]
    InvalidConfig(String),
    #[error("Monte Carlo estimate needs at least 1000 draws, got {0}")]
    TooFewDraws(usize),
}

/// One weighted multivariate normal. The covariance is kept together with
/// its Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianComponent {
    weight: f64,
    mean: Vec<f64>,
    /// Row-major d x d.
    cov: Vec<f64>,
    /// Lower Cholesky factor, row-major.
    chol: Vec<f64>,
    log_det: f64,
}

impl PartialEq for GaussianComponent {
    fn eq(&self, other: &Self) -> bool {
        self.weight == other.weight && self.mean == other.mean && self.cov == other.cov
    }
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self, GmmError> {
        let d = mean.len();
        if cov.len() != d {
            return Err(GmmError::DimensionMismatch {
                expected: d,
                found: cov.len(),
            });
        }
        let mut flat = Vec::with_capacity(d * d);
        for row in &cov {
            if row.len() != d {
                return Err(GmmError::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::from_flat(weight, mean, flat)
    }

    pub fn from_matrix(weight: f64, mean: Vec<f64>, cov: &DMatrix<f64>) -> Result<Self, GmmError> {
        let d = mean.len();
        if cov.shape() != (d, d) {
            return Err(GmmError::DimensionMismatch {
                expected: d,
                found: cov.nrows(),
            });
        }
        let flat = (0..d * d).map(|i| cov[(i / d, i % d)]).collect();
        Self::from_flat(weight, mean, flat)
    }

    pub(crate) fn from_flat(weight: f64, mean: Vec<f64>, cov: Vec<f64>) -> Result<Self, GmmError> {
        let d = mean.len();
        if d == 0 {
            return Err(GmmError::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(GmmError::InvalidWeight(weight));
        }
        if mean.iter().chain(&cov).any(|v| !v.is_finite()) {
            return Err(GmmError::NonFinite);
        }
        let scale = cov.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..d {
            for j in 0..i {
                if (cov[i * d + j] - cov[j * d + i]).abs() > 1e-12 * scale {
                    return Err(GmmError::NotSymmetric);
                }
            }
        }
        let chol = cholesky(&cov, d).ok_or(GmmError::NotPositiveDefinite)?;
        let log_det = 2.0 * (0..d).map(|i| chol[i * d + i].ln()).sum::<f64>();
        Ok(GaussianComponent {
            weight,
            mean,
            cov,
            chol,
            log_det,
        })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> DMatrix<f64> {
        let d = self.dims();
        DMatrix::from_row_slice(d, d, &self.cov)
    }

    pub fn cov_row_major(&self) -> &[f64] {
        &self.cov
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub(crate) fn chol(&self) -> &[f64] {
        &self.chol
    }

    /// Copy with a different mixing weight.
    pub fn with_weight(&self, weight: f64) -> Self {
        GaussianComponent {
            weight,
            ..self.clone()
        }
    }

    /// Same mean and covariance, ignoring the weight.
    pub fn same_density(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }

    /// Log density of the unweighted normal; `scratch` must hold `d` values.
    fn log_density_with(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        let d = self.dims();
        for (s, (xi, mi)) in scratch.iter_mut().zip(x.iter().zip(&self.mean)) {
            *s = xi - mi;
        }
        forward_substitute(&self.chol, d, scratch);
        let maha: f64 = scratch.iter().map(|v| v * v).sum();
        -0.5 * (d as f64 * LN_2PI + self.log_det + maha)
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64, GmmError> {
        if x.len() != self.dims() {
            return Err(GmmError::DimensionMismatch {
                expected: self.dims(),
                found: x.len(),
            });
        }
        let mut scratch = vec![0.0; x.len()];
        Ok(self.log_density_with(x, &mut scratch))
    }
}

/// A weighted sum of multivariate normals sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self, GmmError> {
        let first = components.first().ok_or(GmmError::Empty)?;
        let d = first.dims();
        if let Some(c) = components.iter().find(|c| c.dims() != d) {
            return Err(GmmError::DimensionMismatch {
                expected: d,
                found: c.dims(),
            });
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GmmError::WeightSum(total));
        }
        Ok(GaussianMixture { components })
    }

    /// A one-component mixture.
    pub fn single(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self, GmmError> {
        GaussianMixture::new(vec![GaussianComponent::new(1.0, mean, cov)?])
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn dims(&self) -> usize {
        self.components[0].dims()
    }

    pub fn check(&self) -> Result<(), GmmError> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GmmError::WeightSum(total));
        }
        Ok(())
    }

    /// The same mixture with its components in the given order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        GaussianMixture {
            components: order.iter().map(|&i| self.components[i].clone()).collect(),
        }
    }

    fn ensure_dims(&self, found: usize) -> Result<(), GmmError> {
        if found != self.dims() {
            return Err(GmmError::DimensionMismatch {
                expected: self.dims(),
                found,
            });
        }
        Ok(())
    }

    /// `log sum_a w_a N(x; mu_a, Sigma_a)` via log-sum-exp.
    pub fn log_pdf(&self, x: &[f64]) -> Result<f64, GmmError> {
        self.ensure_dims(x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GmmError::NonFinite);
        }
        let mut scratch = vec![0.0; x.len()];
        let mut terms = vec![0.0; self.components.len()];
        Ok(self.log_pdf_with(x, &mut scratch, &mut terms))
    }

    pub(crate) fn log_pdf_with(&self, x: &[f64], scratch: &mut [f64], terms: &mut [f64]) -> f64 {
        for (t, c) in terms.iter_mut().zip(&self.components) {
            *t = c.weight.ln() + c.log_density_with(x, scratch);
        }
        log_sum_exp(terms)
    }

    /// Draws one sample into `out` and returns the chosen component index.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> usize {
        let d = self.dims();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                chosen = i;
                break;
            }
        }
        let comp = &self.components[chosen];
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let mut v = comp.mean[i];
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                v += comp.chol[i * d + j] * zj;
            }
            *o = v;
        }
        chosen
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mixture serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Free-function form of [`GaussianMixture::log_pdf`].
pub fn log_pdf(g: &GaussianMixture, x: &[f64]) -> Result<f64, GmmError> {
    g.log_pdf(x)
}

#[derive(Serialize, Deserialize)]
struct ComponentJson {
    weight: f64,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MixtureJson {
    dims: usize,
    components: Vec<ComponentJson>,
}

impl Serialize for GaussianMixture {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let d = self.dims();
        MixtureJson {
            dims: d,
            components: self
                .components
                .iter()
                .map(|c| ComponentJson {
                    weight: c.weight,
                    mean: c.mean.clone(),
                    cov: c.cov.chunks(d).map(<[f64]>::to_vec).collect(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GaussianMixture {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = MixtureJson::deserialize(deserializer)?;
        let components = raw
            .components
            .into_iter()
            .map(|c| GaussianComponent::new(c.weight, c.mean, c.cov))
            .collect::<Result<Vec<_>, _>>()
            .map_err(D::Error::custom)?;
        let g = GaussianMixture::new(components).map_err(D::Error::custom)?;
        if g.dims() != raw.dims {
            return Err(D::Error::custom(GmmError::DimensionMismatch {
                expected: raw.dims,
                found: g.dims(),
            }));
        }
        Ok(g)
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Lower Cholesky factor of a row-major SPD matrix.
pub(crate) fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Solves `L y = b` in place.
pub(crate) fn forward_substitute(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
}
