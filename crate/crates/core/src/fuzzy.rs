//! Interval type-2 inference: memberships, spatial and temporal firing,
//! Chebyshev consequents and the q-weighted type reduction.
//!
//! Everything here is pure except [`temporal_firing`] and [`commit_memory`],
//! which advance a rule's one-step recurrent state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};
use crate::rules::UtilityStats;
use crate::scalar::Real;

/// One fuzzy rule: interval premise, Chebyshev consequent and the running
/// statistics the rest of the engine keeps per rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule<T> {
    /// Stable identity, never reused, survives pruning and recall.
    pub id: u64,
    pub c_lower: Vec<T>,
    pub c_upper: Vec<T>,
    pub inv_cov: Matrix<T>,
    /// Per-dimension fuzzy-set radii, kept in sync with `inv_cov`.
    pub sigma: Vec<T>,
    /// `(2p+1) x m`, one column per output.
    pub weights: Matrix<T>,
    /// FWGRLS covariance, `(2p+1) x (2p+1)`.
    pub rls_cov: Matrix<T>,
    pub lambda: T,
    pub prev_psi_upper: T,
    pub prev_psi_lower: T,
    pub n_pop: u64,
    pub coord_sum: Vec<T>,
    /// Per-dimension sums of squares of the absorbed samples.
    pub sq_sum: Vec<T>,
    pub util: UtilityStats<T>,
}

impl<T: Real> Rule<T> {
    /// A rule whose population is the single point `center`, with interval
    /// centroid `center ± delta`. The recurrent memory starts at the rule's
    /// own spatial firing for `center`.
    pub fn new(
        id: u64,
        center: &[T],
        delta: T,
        inv_cov: Matrix<T>,
        weights: Matrix<T>,
        rls_cov: Matrix<T>,
        lambda: T,
        n_outputs: usize,
    ) -> Result<Self> {
        let sigma = extract_radii(&inv_cov)?;
        let mut rule = Rule {
            id,
            c_lower: center.iter().map(|&c| c - delta).collect(),
            c_upper: center.iter().map(|&c| c + delta).collect(),
            inv_cov,
            sigma,
            weights,
            rls_cov,
            lambda,
            prev_psi_upper: T::zero(),
            prev_psi_lower: T::zero(),
            n_pop: 1,
            coord_sum: center.to_vec(),
            sq_sum: center.iter().map(|&v| v * v).collect(),
            util: UtilityStats::new(n_outputs),
        };
        let f = spatial_firing(&rule, center);
        rule.prev_psi_upper = f.r_upper;
        rule.prev_psi_lower = f.r_lower;
        Ok(rule)
    }

    pub fn dim(&self) -> usize {
        self.c_lower.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.weights.cols()
    }

    /// Midpoint of the interval centroid.
    pub fn center(&self) -> Vec<T> {
        let half = T::of(0.5);
        self.c_lower.iter().zip(&self.c_upper).map(|(&l, &u)| (l + u) * half).collect()
    }

    /// Squared Mahalanobis distance from `x` to the centroid midpoint.
    pub fn mahalanobis_sq(&self, x: &[T]) -> T {
        let d: Vec<T> = x.iter().zip(self.center()).map(|(&a, b)| a - b).collect();
        self.inv_cov.quad_form(&d)
    }

    /// `β = x_e W`, one value per output.
    pub fn consequent(&self, x_e: &[T]) -> Vec<T> {
        self.weights.vec_mul(x_e)
    }

    pub fn refresh_radii(&mut self) -> Result<()> {
        self.sigma = extract_radii(&self.inv_cov)?;
        Ok(())
    }

    /// Moves the premise and density accumulators to coordinates
    /// `x' = a x + b` (per dimension, `a > 0`), so the rule keeps covering
    /// the same region of raw input space. The consequent is left as is.
    pub fn reexpress(&mut self, a: &[T], b: &[T]) -> Result<()> {
        let p = self.dim();
        let n = T::of(self.n_pop as f64);
        let two = T::of(2.0);
        for j in 0..p {
            self.c_lower[j] = a[j] * self.c_lower[j] + b[j];
            self.c_upper[j] = a[j] * self.c_upper[j] + b[j];
            let s = self.coord_sum[j];
            self.sq_sum[j] = a[j] * a[j] * self.sq_sum[j] + two * a[j] * b[j] * s + n * b[j] * b[j];
            self.coord_sum[j] = a[j] * s + n * b[j];
            for k in 0..p {
                self.inv_cov[(j, k)] = self.inv_cov[(j, k)] / (a[j] * a[k]);
            }
        }
        self.sigma = extract_radii(&self.inv_cov)?;
        Ok(())
    }

    /// Checks the structural invariants; used by tests and after restores.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.c_lower.iter().zip(&self.c_upper).any(|(l, u)| !(l <= u)) {
            return Err(format!("rule {}: c_lower > c_upper", self.id));
        }
        if self.sigma.iter().any(|&s| !(s > T::zero())) {
            return Err(format!("rule {}: non-positive radius", self.id));
        }
        if self.inv_cov.cholesky().is_none() {
            return Err(format!("rule {}: inverse covariance not SPD", self.id));
        }
        for i in 0..self.inv_cov.rows() {
            for j in 0..i {
                let (a, b) = (self.inv_cov[(i, j)], self.inv_cov[(j, i)]);
                if (a - b).abs() > T::of(1e-9) * (a.abs() + b.abs() + T::one()) {
                    return Err(format!("rule {}: inverse covariance not symmetric", self.id));
                }
            }
        }
        let (z, o) = (T::zero(), T::one());
        if !(self.lambda >= z && self.lambda <= o) {
            return Err(format!("rule {}: lambda out of [0,1]", self.id));
        }
        if !(z <= self.prev_psi_lower && self.prev_psi_lower <= self.prev_psi_upper && self.prev_psi_upper <= o) {
            return Err(format!("rule {}: recurrent memory out of order", self.id));
        }
        if self.n_pop < 1 {
            return Err(format!("rule {}: empty population", self.id));
        }
        Ok(())
    }
}

/// Upper/lower spatial firing and the temporal firing derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalFiring<T> {
    pub r_upper: T,
    pub r_lower: T,
    pub psi_upper: T,
    pub psi_lower: T,
}

impl<T: Real> IntervalFiring<T> {
    /// Type-reduced spatial firing `q R_lower + (1 - q) R_upper`.
    pub fn crisp(&self, q: T) -> T {
        q * self.r_lower + (T::one() - q) * self.r_upper
    }
}

/// Fuzzy-set radii from the inverse covariance: `1 / sqrt(Σ⁻¹_jj)`, the
/// axis-aligned distance from the centre to the unit-Mahalanobis contour.
pub fn extract_radii<T: Real>(inv_cov: &Matrix<T>) -> Result<Vec<T>> {
    inv_cov
        .diag()
        .into_iter()
        .map(|d| {
            if d > T::zero() && d.is_finite() {
                Ok(d.sqrt().recip())
            } else {
                Err(Error::DegenerateCovariance("non-positive diagonal in inverse covariance"))
            }
        })
        .collect()
}

#[inline]
fn log_gauss<T: Real>(x: T, c: T, sigma: T) -> T {
    let d = (x - c) / sigma;
    -(d * d)
}

/// Log of the upper and lower memberships of `x` in the interval Gaussian set.
pub fn log_interval_membership<T: Real>(x: T, c_lower: T, c_upper: T, sigma: T) -> (T, T) {
    let upper = if x < c_lower {
        log_gauss(x, c_lower, sigma)
    } else if x > c_upper {
        log_gauss(x, c_upper, sigma)
    } else {
        T::zero()
    };
    let mid = (c_lower + c_upper) * T::of(0.5);
    let lower = if x <= mid { log_gauss(x, c_upper, sigma) } else { log_gauss(x, c_lower, sigma) };
    (upper, lower)
}

/// Upper and lower membership degrees `(μ̄, μ_)`.
pub fn interval_membership<T: Real>(x: T, c_lower: T, c_upper: T, sigma: T) -> (T, T) {
    let (u, l) = log_interval_membership(x, c_lower, c_upper, sigma);
    (u.exp(), l.exp())
}

/// Product t-norm over dimensions, accumulated in log space.
pub fn spatial_firing<T: Real>(rule: &Rule<T>, x: &[T]) -> IntervalFiring<T> {
    let (mut lu, mut ll) = (T::zero(), T::zero());
    for j in 0..x.len() {
        let (u, l) = log_interval_membership(x[j], rule.c_lower[j], rule.c_upper[j], rule.sigma[j]);
        lu = lu + u;
        ll = ll + l;
    }
    let (r_upper, r_lower) = (lu.exp(), ll.exp().min(lu.exp()));
    IntervalFiring { r_upper, r_lower, psi_upper: r_upper, psi_lower: r_lower }
}

/// Recurrent blend `ψ = λ R + (1 - λ) ψ_prev` without touching the rule.
pub fn temporal_blend<T: Real>(rule: &Rule<T>, spatial: IntervalFiring<T>) -> IntervalFiring<T> {
    let lam = rule.lambda;
    let keep = T::one() - lam;
    IntervalFiring {
        psi_upper: lam * spatial.r_upper + keep * rule.prev_psi_upper,
        psi_lower: lam * spatial.r_lower + keep * rule.prev_psi_lower,
        ..spatial
    }
}

/// [`temporal_blend`] followed by storing the result as the rule's memory.
pub fn temporal_firing<T: Real>(rule: &mut Rule<T>, spatial: IntervalFiring<T>) -> IntervalFiring<T> {
    let f = temporal_blend(rule, spatial);
    rule.prev_psi_upper = f.psi_upper;
    rule.prev_psi_lower = f.psi_lower;
    f
}

/// `[1, A1(x1), A2(x1), ..., A1(xp), A2(xp)]` with the Chebyshev recursion
/// `A_{n+1} = 2 x A_n - A_{n-1}`.
pub fn chebyshev_expand<T: Real>(x: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(2 * x.len() + 1);
    out.push(T::one());
    let two = T::of(2.0);
    for &xj in x {
        let a0 = T::one();
        let a1 = xj;
        let a2 = two * xj * a1 - a0;
        out.push(a1);
        out.push(a2);
    }
    out
}

/// Everything one forward pass produces; the adaptation step reuses it.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference<T> {
    pub x_e: Vec<T>,
    pub firings: Vec<IntervalFiring<T>>,
    /// Each rule's `(upper, lower)` recurrent memory before this pass.
    pub prev_memory: Vec<(T, T)>,
    /// `betas[i][o]`
    pub betas: Vec<Vec<T>>,
    pub sum_upper: T,
    pub sum_lower: T,
    pub upper_mean: Vec<T>,
    pub lower_mean: Vec<T>,
    pub output: Vec<T>,
    /// Set when both firing sums underflowed and the output was taken from
    /// the Mahalanobis-nearest rule.
    pub fallback: Option<usize>,
}

impl<T: Real> Inference<T> {
    /// Share of rule `i` in the type-reduced output for design factor `q`.
    pub fn normalized_firing(&self, i: usize, q: T) -> T {
        if let Some(k) = self.fallback {
            return if k == i { T::one() } else { T::zero() };
        }
        let f = &self.firings[i];
        let up = f.psi_upper / self.sum_upper;
        let lo = if self.sum_lower >= T::firing_floor() { f.psi_lower / self.sum_lower } else { up };
        (T::one() - q) * up + q * lo
    }

    /// True when only the upper sum is usable and the lower mean was
    /// replaced by the upper mean.
    pub fn lower_degenerate(&self) -> bool {
        self.fallback.is_none() && self.sum_lower < T::firing_floor()
    }
}

fn weighted_mean<T: Real>(weights: impl Iterator<Item = T>, betas: &[Vec<T>], sum: T, m: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); m];
    for (w, b) in weights.zip(betas) {
        for o in 0..m {
            acc[o] = acc[o] + w * b[o];
        }
    }
    acc.into_iter().map(|v| v / sum).collect()
}

/// Forward pass over a rule base with per-output design factors `q`.
///
/// Pure: the temporal firings are computed against each rule's stored memory
/// but not written back; see [`commit_memory`].
pub fn evaluate<T: Real>(rules: &[Rule<T>], q: &[T], x: &[T]) -> Result<Inference<T>> {
    if rules.is_empty() {
        return Err(Error::EmptyModel);
    }
    let m = q.len();
    let x_e = chebyshev_expand(x);
    let firings: Vec<_> = rules.iter().map(|r| temporal_blend(r, spatial_firing(r, x))).collect();
    let prev_memory = rules.iter().map(|r| (r.prev_psi_upper, r.prev_psi_lower)).collect();
    let betas: Vec<Vec<T>> = rules.iter().map(|r| r.consequent(&x_e)).collect();
    let sum_upper: T = firings.iter().map(|f| f.psi_upper).sum();
    let sum_lower: T = firings.iter().map(|f| f.psi_lower).sum();
    let floor = T::firing_floor();

    if sum_upper < floor {
        let nearest = rules
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.mahalanobis_sq(x)))
            .fold((0, T::infinity()), |best, cur| if cur.1 < best.1 { cur } else { best })
            .0;
        let output = betas[nearest].clone();
        return Ok(Inference {
            x_e,
            firings,
            prev_memory,
            upper_mean: output.clone(),
            lower_mean: output.clone(),
            betas,
            sum_upper,
            sum_lower,
            output,
            fallback: Some(nearest),
        });
    }

    let upper_mean = weighted_mean(firings.iter().map(|f| f.psi_upper), &betas, sum_upper, m);
    let lower_mean = if sum_lower >= floor {
        weighted_mean(firings.iter().map(|f| f.psi_lower), &betas, sum_lower, m)
    } else {
        upper_mean.clone()
    };
    let output = (0..m).map(|o| (T::one() - q[o]) * upper_mean[o] + q[o] * lower_mean[o]).collect();
    Ok(Inference { x_e, firings, prev_memory, betas, sum_upper, sum_lower, upper_mean, lower_mean, output, fallback: None })
}

/// Stores the temporal firings of `inf` as every rule's recurrent memory.
pub fn commit_memory<T: Real>(rules: &mut [Rule<T>], inf: &Inference<T>) {
    for (r, f) in rules.iter_mut().zip(&inf.firings) {
        r.prev_psi_upper = f.psi_upper;
        r.prev_psi_lower = f.psi_lower;
    }
}

/// [`evaluate`] followed by [`commit_memory`].
pub fn infer<T: Real>(rules: &mut [Rule<T>], q: &[T], x: &[T]) -> Result<Inference<T>> {
    let inf = evaluate(rules, q, x)?;
    commit_memory(rules, &inf);
    Ok(inf)
}

/// Index of the rule whose midpoint is Euclidean-nearest to `x`.
pub fn nearest_by_center<T: Real>(rules: &[Rule<T>], x: &[T]) -> Option<usize> {
    rules
        .iter()
        .enumerate()
        .map(|(i, r)| (i, sq_dist(&r.center(), x)))
        .fold(None, |best: Option<(usize, T)>, cur| match best {
            Some(b) if b.1 <= cur.1 => Some(b),
            _ => Some(cur),
        })
        .map(|(i, _)| i)
}
