//! Expectation-maximization for full-covariance Gaussian mixtures.
//!
//! Covariances are kept above a floor proportional to each channel's sample
//! variance: with `S = diag(sd)` the covariance `Sigma` is replaced by
//! `S * clamp(S^-1 Sigma S^-1, floor) * S`, where `clamp` lifts eigenvalues
//! below `floor` up to it. This is the exact maximizer of the M-step under the
//! constraint `Sigma >= floor * S^2`, so the log-likelihood stays monotone.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{cholesky, forward_substitute, log_sum_exp, GaussianComponent, GaussianMixture, GmmError};
use crate::ftdata::SampleMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_3;
const LLOYD_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPolicy {
    /// k-means++ seeding refined by Lloyd iterations; components start from
    /// the resulting clusters.
    #[default]
    KMeans,
    /// k distinct data rows as means, the pooled covariance for every
    /// component, uniform weights.
    RandomFromData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop when the log-likelihood changes by at most `rel_tol * |ll|`.
    pub rel_tol: f64,
    /// Covariance floor as a fraction of each channel's sample variance.
    pub cov_floor: f64,
    pub init: InitPolicy,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            k: 3,
            max_iters: 200,
            rel_tol: 1e-6,
            cov_floor: 1e-6,
            init: InitPolicy::KMeans,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn with_k(k: usize, seed: u64) -> Self {
        EmConfig {
            k,
            seed,
            ..EmConfig::default()
        }
    }

    fn check(&self) -> Result<(), GmmError> {
        if self.k < 1 {
            return Err(GmmError::InvalidConfig("k must be at least 1".into()));
        }
        if self.max_iters < 1 {
            return Err(GmmError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(GmmError::InvalidConfig("rel_tol must be positive".into()));
        }
        if !(self.cov_floor > 0.0 && self.cov_floor.is_finite()) {
            return Err(GmmError::InvalidConfig("cov_floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub k: usize,
    /// Number of M-steps taken.
    pub iterations: usize,
    pub converged: bool,
    /// All rows identical; a single floored component was returned.
    pub degenerate: bool,
    pub log_likelihood: f64,
    /// Total log-likelihood of the initial parameters and after each M-step.
    pub log_likelihoods: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub mixture: GaussianMixture,
    pub report: FitReport,
}

struct Params {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<Vec<f64>>,
}

/// Row-major view of the samples plus the per-channel scales used by the
/// covariance floor.
struct Data<'a> {
    x: &'a [f64],
    n: usize,
    d: usize,
    scales: Vec<f64>,
    floor: f64,
}

impl Data<'_> {
    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }
}

/// Fits a `cfg.k`-component mixture to the rows of `m`.
pub fn fit_em(m: &SampleMatrix, cfg: &EmConfig) -> Result<FitOutcome, GmmError> {
    cfg.check()?;
    let n = m.nrows();
    let d = m.dims();
    let x = m.to_row_major();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GmmError::NonFinite);
    }

    let mean = column_means(&x, n, d);
    let variances: Vec<f64> = (0..d)
        .map(|j| {
            (0..n).map(|i| (x[i * d + j] - mean[j]).powi(2)).sum::<f64>() / n as f64
        })
        .collect();
    let scales: Vec<f64> = variances
        .iter()
        .map(|&v| if v > 0.0 { v.sqrt() } else { 1.0 })
        .collect();
    let data = Data {
        x: &x,
        n,
        d,
        scales,
        floor: cfg.cov_floor,
    };

    if (1..n).all(|i| data.row(i) == data.row(0)) {
        let cov = floor_covariance(&vec![0.0; d * d], &data);
        let comp = GaussianComponent::from_flat(1.0, data.row(0).to_vec(), cov)?;
        let mixture = GaussianMixture::new(vec![comp])?;
        let ll = total_log_likelihood(&mixture, &data);
        return Ok(FitOutcome {
            mixture,
            report: FitReport {
                k: 1,
                iterations: 0,
                converged: true,
                degenerate: true,
                log_likelihood: ll,
                log_likelihoods: vec![ll],
            },
        });
    }

    let needed = cfg.k * d;
    if n <= needed {
        return Err(GmmError::TooFewSamples { needed, found: n });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = match cfg.init {
        InitPolicy::KMeans => init_kmeans(&data, cfg.k, &mut rng),
        InitPolicy::RandomFromData => init_random(&data, cfg.k, &mut rng),
    };

    let mut resp = vec![0.0; n * cfg.k];
    let mut ll = e_step(&params, &data, &mut resp)?;
    let mut history = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        params = m_step(&params, &data, &resp);
        iterations += 1;
        let next = e_step(&params, &data, &mut resp)?;
        history.push(next);
        let change = (next - ll).abs();
        ll = next;
        if change <= cfg.rel_tol * ll.abs() {
            converged = true;
            break;
        }
    }

    let mixture = to_mixture(&params)?;
    Ok(FitOutcome {
        mixture,
        report: FitReport {
            k: cfg.k,
            iterations,
            converged,
            degenerate: false,
            log_likelihood: ll,
            log_likelihoods: history,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BicSweep {
    pub best_k: usize,
    /// `(k, bic)` for each candidate that could be fitted.
    pub scores: Vec<(usize, f64)>,
}

/// Fits each candidate `k` and keeps the one with the lowest Bayesian
/// information criterion. Ties go to the smaller `k`.
pub fn select_k_by_bic(
    m: &SampleMatrix,
    cfg: &EmConfig,
    candidates: &[usize],
) -> Result<(FitOutcome, BicSweep), GmmError> {
    let n = m.nrows() as f64;
    let d = m.dims();
    let mut best: Option<(f64, FitOutcome)> = None;
    let mut scores = Vec::new();
    let mut last_err = None;
    for &k in candidates {
        let outcome = match fit_em(m, &EmConfig { k, ..cfg.clone() }) {
            Ok(o) => o,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let k_eff = outcome.report.k;
        let params = (k_eff - 1) + k_eff * d + k_eff * d * (d + 1) / 2;
        let bic = -2.0 * outcome.report.log_likelihood + params as f64 * n.ln();
        scores.push((k, bic));
        if best.as_ref().map(|(b, _)| bic < *b).unwrap_or(true) {
            best = Some((bic, outcome));
        }
    }
    match best {
        Some((_, outcome)) => {
            let best_k = outcome.report.k;
            Ok((outcome, BicSweep { best_k, scores }))
        }
        None => Err(last_err.unwrap_or(GmmError::InvalidConfig("no candidate k".into()))),
    }
}

fn column_means(x: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for row in x.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    mean
}

fn to_mixture(p: &Params) -> Result<GaussianMixture, GmmError> {
    let total: f64 = p.weights.iter().sum();
    let comps = p
        .weights
        .iter()
        .zip(&p.means)
        .zip(&p.covs)
        .map(|((w, m), c)| GaussianComponent::from_flat(w / total, m.clone(), c.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    GaussianMixture::new(comps)
}

fn total_log_likelihood(g: &GaussianMixture, data: &Data) -> f64 {
    let mut scratch = vec![0.0; data.d];
    let mut terms = vec![0.0; g.components().len()];
    (0..data.n)
        .map(|i| g.log_pdf_with(data.row(i), &mut scratch, &mut terms))
        .sum()
}

/// Fills `resp` with responsibilities and returns the total log-likelihood.
fn e_step(p: &Params, data: &Data, resp: &mut [f64]) -> Result<f64, GmmError> {
    let k = p.weights.len();
    let d = data.d;
    let mut chols = Vec::with_capacity(k);
    let mut consts = Vec::with_capacity(k);
    for (w, cov) in p.weights.iter().zip(&p.covs) {
        let l = cholesky(cov, d).ok_or(GmmError::NotPositiveDefinite)?;
        let log_det = 2.0 * (0..d).map(|i| l[i * d + i].ln()).sum::<f64>();
        consts.push(w.ln() - 0.5 * (d as f64 * LN_2PI + log_det));
        chols.push(l);
    }
    let mut scratch = vec![0.0; d];
    let mut ll = 0.0;
    for i in 0..data.n {
        let row = data.row(i);
        let r = &mut resp[i * k..(i + 1) * k];
        for a in 0..k {
            for (s, (xv, mv)) in scratch.iter_mut().zip(row.iter().zip(&p.means[a])) {
                *s = xv - mv;
            }
            forward_substitute(&chols[a], d, &mut scratch);
            let maha: f64 = scratch.iter().map(|v| v * v).sum();
            r[a] = consts[a] - 0.5 * maha;
        }
        let lse = log_sum_exp(r);
        ll += lse;
        r.iter_mut().for_each(|v| *v = (*v - lse).exp());
    }
    Ok(ll)
}

fn m_step(prev: &Params, data: &Data, resp: &[f64]) -> Params {
    let k = prev.weights.len();
    let (n, d) = (data.n, data.d);
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for a in 0..k {
        let nk: f64 = (0..n).map(|i| resp[i * k + a]).sum();
        if nk <= f64::MIN_POSITIVE * n as f64 {
            // collapsed component: keep its shape, give it negligible mass
            weights.push(f64::MIN_POSITIVE);
            means.push(prev.means[a].clone());
            covs.push(prev.covs[a].clone());
            continue;
        }
        let mut mean = vec![0.0; d];
        for i in 0..n {
            let r = resp[i * k + a];
            for (m, v) in mean.iter_mut().zip(data.row(i)) {
                *m += r * v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nk);
        let mut cov = vec![0.0; d * d];
        let mut diff = vec![0.0; d];
        for i in 0..n {
            let r = resp[i * k + a];
            for (df, (v, m)) in diff.iter_mut().zip(data.row(i).iter().zip(&mean)) {
                *df = v - m;
            }
            for p in 0..d {
                for q in 0..=p {
                    cov[p * d + q] += r * diff[p] * diff[q];
                }
            }
        }
        for p in 0..d {
            for q in 0..=p {
                let v = cov[p * d + q] / nk;
                cov[p * d + q] = v;
                cov[q * d + p] = v;
            }
        }
        weights.push(nk / n as f64);
        means.push(mean);
        covs.push(floor_covariance(&cov, data));
    }
    Params {
        weights,
        means,
        covs,
    }
}

/// Lifts the eigenvalues of the scale-normalized covariance to the floor.
/// Covariances already above the floor are returned unchanged.
fn floor_covariance(cov: &[f64], data: &Data) -> Vec<f64> {
    let d = data.d;
    let s = &data.scales;
    let normalized = DMatrix::from_fn(d, d, |i, j| cov[i * d + j] / (s[i] * s[j]));
    let eig = SymmetricEigen::new(normalized);
    if eig.eigenvalues.iter().all(|&l| l >= data.floor) {
        return cov.to_vec();
    }
    let lifted = eig.eigenvalues.map(|l| l.max(data.floor));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&lifted) * v.transpose();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let val = 0.5 * (rebuilt[(i, j)] + rebuilt[(j, i)]) * s[i] * s[j];
            out[i * d + j] = val;
            out[j * d + i] = val;
        }
    }
    out
}

fn pooled_covariance(data: &Data) -> Vec<f64> {
    let d = data.d;
    let mean = column_means(data.x, data.n, d);
    let mut cov = vec![0.0; d * d];
    for i in 0..data.n {
        let row = data.row(i);
        for p in 0..d {
            for q in 0..d {
                cov[p * d + q] += (row[p] - mean[p]) * (row[q] - mean[q]);
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= data.n as f64);
    floor_covariance(&cov, data)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn init_random(data: &Data, k: usize, rng: &mut ChaCha8Rng) -> Params {
    let cov = pooled_covariance(data);
    let mut idx = sample_indices(rng, data.n, k).into_vec();
    idx.sort_unstable();
    Params {
        weights: vec![1.0 / k as f64; k],
        means: idx.iter().map(|&i| data.row(i).to_vec()).collect(),
        covs: vec![cov; k],
    }
}

fn init_kmeans(data: &Data, k: usize, rng: &mut ChaCha8Rng) -> Params {
    let (n, d) = (data.n, data.d);
    // distances are measured on scale-normalized channels
    let scaled: Vec<f64> = data
        .x
        .iter()
        .enumerate()
        .map(|(i, v)| v / data.scales[i % d])
        .collect();
    let row = |i: usize| &scaled[i * d..(i + 1) * d];

    // k-means++ seeding
    let mut centers: Vec<Vec<f64>> = vec![row(rng.random_range(0..n)).to_vec()];
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, w) in nearest.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = row(pick).to_vec();
        for (i, best) in nearest.iter_mut().enumerate() {
            *best = best.min(sq_dist(row(i), &c));
        }
        centers.push(c);
    }

    // Lloyd refinement
    let mut assign = vec![0usize; n];
    for _ in 0..LLOYD_ITERS {
        let mut changed = false;
        for (i, slot) in assign.iter_mut().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for (c, center) in centers.iter().enumerate() {
                let dist = sq_dist(row(i), center);
                if dist < best.0 {
                    best = (dist, c);
                }
            }
            if *slot != best.1 {
                *slot = best.1;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assign.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }

    // one-hot responsibilities, then a regular M-step; empty clusters keep
    // their center with the pooled covariance
    let pooled = pooled_covariance(data);
    let mut resp = vec![0.0; n * k];
    for (i, &c) in assign.iter().enumerate() {
        resp[i * k + c] = 1.0;
    }
    let seed_params = Params {
        weights: vec![1.0 / k as f64; k],
        means: centers
            .iter()
            .map(|c| c.iter().enumerate().map(|(j, v)| v * data.scales[j]).collect())
            .collect(),
        covs: vec![pooled.clone(); k],
    };
    let mut p = m_step(&seed_params, data, &resp);
    let mut counts = vec![0usize; k];
    for &c in &assign {
        counts[c] += 1;
    }
    for (c, &count) in counts.iter().enumerate() {
        if count < 2 {
            p.covs[c] = pooled.clone();
            p.weights[c] = p.weights[c].max(1.0 / n as f64);
        }
    }
    let total: f64 = p.weights.iter().sum();
    p.weights.iter_mut().for_each(|w| *w /= total);
    p
}
