//! KL divergence between Gaussians and between Gaussian mixtures.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{forward_substitute, log_sum_exp, GaussianComponent, GaussianMixture, GmmError};

/// Closed-form `KL(a || b)` between the normals of two components; weights
/// are ignored.
pub fn gauss_kl(a: &GaussianComponent, b: &GaussianComponent) -> Result<f64, GmmError> {
    let d = a.dims();
    if b.dims() != d {
        return Err(GmmError::DimensionMismatch {
            expected: d,
            found: b.dims(),
        });
    }
    if a.same_density(b) {
        return Ok(0.0);
    }
    let lb = b.chol();
    let la = a.chol();

    // tr(Sb^-1 Sa) = ||Lb^-1 La||_F^2
    let mut trace = 0.0;
    let mut col = vec![0.0; d];
    for j in 0..d {
        for i in 0..d {
            col[i] = la[i * d + j];
        }
        forward_substitute(lb, d, &mut col);
        trace += col.iter().map(|v| v * v).sum::<f64>();
    }

    let mut delta: Vec<f64> = b.mean().iter().zip(a.mean()).map(|(mb, ma)| mb - ma).collect();
    forward_substitute(lb, d, &mut delta);
    let maha: f64 = delta.iter().map(|v| v * v).sum();

    let kl = 0.5 * (trace + maha - d as f64 + b.log_det() - a.log_det());
    Ok(kl.max(0.0))
}

/// A divergence value with the unclamped estimate kept alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Divergence {
    pub value: f64,
    pub raw: f64,
    /// Set when a negative raw estimate (in either direction, for
    /// symmetrized values) was clamped to zero.
    pub clamped: bool,
}

fn ensure_same_dims(f: &GaussianMixture, g: &GaussianMixture) -> Result<(), GmmError> {
    if f.dims() != g.dims() {
        return Err(GmmError::DimensionMismatch {
            expected: f.dims(),
            found: g.dims(),
        });
    }
    Ok(())
}

/// Variational approximation of `KL(f || g)`:
///
/// ```text
/// sum_a pi_a * [ log sum_a' pi_a' exp(-KL(f_a || f_a'))
///              - log sum_b  w_b   exp(-KL(f_a || g_b)) ]
/// ```
///
/// Both inner sums are evaluated with log-sum-exp. Negative raw values are
/// clamped to 0 and reported through [`Divergence::clamped`].
pub fn variational_kl(f: &GaussianMixture, g: &GaussianMixture) -> Result<Divergence, GmmError> {
    ensure_same_dims(f, g)?;
    let fc = f.components();
    let gc = g.components();
    let mut self_terms = vec![0.0; fc.len()];
    let mut cross_terms = vec![0.0; gc.len()];
    let mut raw = 0.0;
    for a in fc {
        for (t, a2) in self_terms.iter_mut().zip(fc) {
            *t = a2.weight().ln() - gauss_kl(a, a2)?;
        }
        for (t, b) in cross_terms.iter_mut().zip(gc) {
            *t = b.weight().ln() - gauss_kl(a, b)?;
        }
        raw += a.weight() * (log_sum_exp(&self_terms) - log_sum_exp(&cross_terms));
    }
    Ok(Divergence {
        value: raw.max(0.0),
        raw,
        clamped: raw < 0.0,
    })
}

/// `(KL(f||g) + KL(g||f)) / 2` using [`variational_kl`] in both directions.
pub fn symmetric_divergence(
    f: &GaussianMixture,
    g: &GaussianMixture,
) -> Result<Divergence, GmmError> {
    let fg = variational_kl(f, g)?;
    let gf = variational_kl(g, f)?;
    Ok(Divergence {
        value: (fg.value + gf.value) / 2.0,
        raw: (fg.raw + gf.raw) / 2.0,
        clamped: fg.clamped || gf.clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Monte Carlo `KL(f || g)` from `n` draws of `f`.
pub fn mc_kl(
    f: &GaussianMixture,
    g: &GaussianMixture,
    n: usize,
    seed: u64,
) -> Result<McEstimate, GmmError> {
    ensure_same_dims(f, g)?;
    if n < 1000 {
        return Err(GmmError::TooFewDraws(n));
    }
    let d = f.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut f_terms = vec![0.0; f.components().len()];
    let mut g_terms = vec![0.0; g.components().len()];
    let mut diffs = Vec::with_capacity(n);
    for _ in 0..n {
        f.sample_into(&mut rng, &mut x);
        let lf = f.log_pdf_with(&x, &mut scratch, &mut f_terms);
        let lg = g.log_pdf_with(&x, &mut scratch, &mut g_terms);
        diffs.push(lf - lg);
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    Ok(McEstimate {
        value: mean,
        std_error: (var / nf).sqrt(),
        draws: n,
    })
}
