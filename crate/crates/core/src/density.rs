//! Gaussian mixture over the input space, fitted once on the warm-up prefix
//! and then used to weight rule significance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};
use crate::scalar::Real;

pub const MAX_COMPONENTS: usize = 3;
const MAX_ITER: usize = 100;
const REL_TOL: f64 = 1e-8;
const REG: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmDensity<T> {
    pub means: Vec<Vec<T>>,
    pub covs: Vec<Matrix<T>>,
    pub weights: Vec<T>,
}

/// Diagnostics from one EM run, kept for tests and reports.
#[derive(Debug, Clone)]
pub struct EmTrace {
    pub components: usize,
    pub log_likelihood: Vec<f64>,
    pub bic: f64,
}

impl<T: Real> GmmDensity<T> {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Moves the mixture to coordinates `x' = a x + b` (per dimension).
    pub fn reexpress(&mut self, a: &[T], b: &[T]) {
        for mean in &mut self.means {
            for (v, (&aj, &bj)) in mean.iter_mut().zip(a.iter().zip(b)) {
                *v = aj * *v + bj;
            }
        }
        for cov in &mut self.covs {
            for i in 0..a.len() {
                for j in 0..a.len() {
                    cov[(i, j)] = cov[(i, j)] * a[i] * a[j];
                }
            }
        }
    }

    pub fn pdf(&self, x: &[T]) -> Result<T> {
        let mut acc = T::zero();
        for k in 0..self.n_components() {
            let d: Vec<T> = x.iter().zip(&self.means[k]).map(|(&a, &b)| a - b).collect();
            acc = acc + self.weights[k] * gaussian_density(&d, &self.covs[k])?;
        }
        Ok(acc)
    }
}

/// `N(d; 0, cov)`
pub fn gaussian_density<T: Real>(d: &[T], cov: &Matrix<T>) -> Result<T> {
    Ok(log_gaussian_density(d, cov)?.exp())
}

pub fn log_gaussian_density<T: Real>(d: &[T], cov: &Matrix<T>) -> Result<T> {
    let ch = cov.cholesky().ok_or(Error::DegenerateCovariance("gaussian covariance not SPD"))?;
    let p = T::of(d.len() as f64);
    let two_pi = T::of(2.0) * T::PI();
    Ok(-(ch.inv_quad_form(d) + ch.log_det() + p * two_pi.ln()) * T::of(0.5))
}

/// Density at `c - v_k` of a zero-mean Gaussian whose covariance is the
/// rule's covariance shrunk by `u` plus the mixture component's covariance.
/// The rule covariance is recovered by inverting `rule_inv_cov`.
pub fn component_convolution<T: Real>(
    gmm: &GmmDensity<T>,
    c: &[T],
    rule_inv_cov: &Matrix<T>,
    u: T,
    comp: usize,
) -> Result<T> {
    let rule_cov = rule_inv_cov
        .cholesky()
        .ok_or(Error::DegenerateCovariance("rule inverse covariance not SPD"))?
        .inverse();
    convolve_with_cov(gmm, c, &rule_cov, u, comp)
}

/// Same as [`component_convolution`] with the rule covariance supplied directly.
pub fn convolve_with_cov<T: Real>(
    gmm: &GmmDensity<T>,
    c: &[T],
    rule_cov: &Matrix<T>,
    u: T,
    comp: usize,
) -> Result<T> {
    let combined = rule_cov.scale(u.recip()).add(&gmm.covs[comp]);
    let d: Vec<T> = c.iter().zip(&gmm.means[comp]).map(|(&a, &b)| a - b).collect();
    log_gaussian_density(&d, &combined)
        .map(T::exp)
        .map_err(|_| Error::DegenerateCovariance("combined convolution covariance not SPD"))
}

/// Fits mixtures with 1..=3 components by EM and keeps the lowest BIC.
pub fn fit_gmm<T: Real>(samples: &[Vec<T>], seed: u64) -> Result<GmmDensity<T>> {
    fit_gmm_traced(samples, seed).map(|(g, _)| g)
}

pub fn fit_gmm_traced<T: Real>(samples: &[Vec<T>], seed: u64) -> Result<(GmmDensity<T>, Vec<EmTrace>)> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::InvalidConfig("cannot fit a mixture to zero samples".into()));
    }
    let p = samples[0].len();
    if samples.iter().any(|s| s.len() != p) {
        return Err(Error::DimensionMismatch { what: "mixture sample", expected: p, got: 0 });
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mixture samples"));
    }
    if n < p + 1 {
        return Ok((diagonal_fallback(samples), Vec::new()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(GmmDensity<T>, f64)> = None;
    let mut traces = Vec::new();
    for k in 1..=MAX_COMPONENTS.min(n) {
        let (g, ll) = em(samples, k, &mut rng)?;
        let params = (k - 1) + k * p + k * p * (p + 1) / 2;
        let bic = -2.0 * ll.last().copied().unwrap_or(f64::NEG_INFINITY) + params as f64 * (n as f64).ln();
        traces.push(EmTrace { components: k, log_likelihood: ll, bic });
        if best.as_ref().is_none_or(|(_, b)| bic < *b) {
            best = Some((g, bic));
        }
    }
    Ok((best.expect("at least one component count tried").0, traces))
}

fn diagonal_fallback<T: Real>(samples: &[Vec<T>]) -> GmmDensity<T> {
    let n = T::of(samples.len() as f64);
    let p = samples[0].len();
    let mean: Vec<T> = (0..p).map(|j| samples.iter().map(|s| s[j]).sum::<T>() / n).collect();
    let var: Vec<T> = (0..p)
        .map(|j| samples.iter().map(|s| (s[j] - mean[j]) * (s[j] - mean[j])).sum::<T>() / n + T::of(REG))
        .collect();
    GmmDensity { means: vec![mean], covs: vec![Matrix::from_diag(&var)], weights: vec![T::one()] }
}

fn kmeanspp<T: Real>(samples: &[Vec<T>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let n = samples.len();
    let mut centers = vec![samples[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = samples
            .iter()
            .map(|s| centers.iter().map(|c| sq_dist(s, c).as_f64()).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(samples[idx].clone());
    }
    centers
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// One EM run; returns the model and the log-likelihood after every E-step.
fn em<T: Real>(samples: &[Vec<T>], k: usize, rng: &mut ChaCha8Rng) -> Result<(GmmDensity<T>, Vec<f64>)> {
    let n = samples.len();
    let p = samples[0].len();
    let global = diagonal_fallback(samples);
    let mut g = GmmDensity {
        means: kmeanspp(samples, k, rng),
        covs: vec![global.covs[0].clone(); k],
        weights: vec![T::one() / T::of(k as f64); k],
    };
    let mut history = Vec::new();
    let mut resp = vec![vec![0.0f64; k]; n];

    for _ in 0..MAX_ITER {
        // E-step
        let mut ll = 0.0;
        for (i, s) in samples.iter().enumerate() {
            let mut logs = vec![0.0; k];
            for c in 0..k {
                let d: Vec<T> = s.iter().zip(&g.means[c]).map(|(&a, &b)| a - b).collect();
                logs[c] = g.weights[c].as_f64().ln() + log_gaussian_density(&d, &g.covs[c])?.as_f64();
            }
            let lse = log_sum_exp(&logs);
            ll += lse;
            for c in 0..k {
                resp[i][c] = (logs[c] - lse).exp();
            }
        }
        let converged = history.last().is_some_and(|&prev: &f64| (ll - prev).abs() <= REL_TOL * ll.abs().max(1e-300));
        history.push(ll);
        if converged {
            break;
        }

        // M-step
        let mut weights = Vec::with_capacity(k);
        for c in 0..k {
            let nk: f64 = resp.iter().map(|r| r[c]).sum();
            if nk < 1e-10 {
                weights.push(1e-12);
                continue;
            }
            weights.push(nk / n as f64);
            let mean: Vec<T> = (0..p)
                .map(|j| T::of(resp.iter().zip(samples).map(|(r, s)| r[c] * s[j].as_f64()).sum::<f64>() / nk))
                .collect();
            let mut cov = Matrix::<T>::scaled_identity(p, T::of(REG));
            for (r, s) in resp.iter().zip(samples) {
                let d: Vec<T> = s.iter().zip(&mean).map(|(&a, &b)| a - b).collect();
                cov.add_outer(T::of(r[c] / nk), &d, &d);
            }
            cov.symmetrize();
            g.means[c] = mean;
            g.covs[c] = cov;
        }
        let total: f64 = weights.iter().sum();
        g.weights = weights.into_iter().map(|w| T::of(w / total)).collect();
    }
    Ok((g, history))
}
