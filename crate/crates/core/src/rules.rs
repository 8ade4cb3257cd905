//! Rule lifecycle: significance scoring against the input density, growth,
//! Bayesian winner selection, premise refinement, pruning and recall.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::density::{convolve_with_cov, GmmDensity};
use crate::error::{Error, Result};
use crate::fuzzy::{spatial_firing, IntervalFiring, Rule};
use crate::linalg::{dot, sq_dist, Matrix};
use crate::scalar::Real;

/// Exponentially weighted firing/target moments used for pruning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityStats<T> {
    pub samples: u64,
    pub mean_fs: T,
    pub var_fs: T,
    pub mean_t: Vec<T>,
    pub var_t: Vec<T>,
    pub cov: Vec<T>,
    /// Consecutive accepted samples with utility below the prune threshold.
    pub low_streak: u32,
    /// Accepted samples since this rule last won.
    pub since_win: u32,
}

impl<T: Real> UtilityStats<T> {
    pub fn new(m: usize) -> Self {
        Self {
            samples: 0,
            mean_fs: T::zero(),
            var_fs: T::zero(),
            mean_t: vec![T::zero(); m],
            var_t: vec![T::zero(); m],
            cov: vec![T::zero(); m],
            low_streak: 0,
            since_win: 0,
        }
    }

    /// Folds one (firing, target) pair in with weight `1 - decay`.
    pub fn push(&mut self, fs: T, t: &[T], decay: T) {
        let a = T::one() - decay;
        if self.samples == 0 {
            self.mean_fs = fs;
            self.mean_t = t.to_vec();
        } else {
            let dfs = fs - self.mean_fs;
            self.mean_fs = self.mean_fs + a * dfs;
            self.var_fs = decay * (self.var_fs + a * dfs * dfs);
            for o in 0..t.len() {
                let dt = t[o] - self.mean_t[o];
                self.mean_t[o] = self.mean_t[o] + a * dt;
                self.var_t[o] = decay * (self.var_t[o] + a * dt * dt);
                self.cov[o] = decay * (self.cov[o] + a * dfs * dt);
            }
        }
        self.samples += 1;
    }

    /// Largest |correlation| between firing and any target; zero when either
    /// side has no variance.
    pub fn utility(&self) -> T {
        let tiny = T::of(1e-24);
        if !(self.var_fs > tiny) {
            return T::zero();
        }
        (0..self.cov.len())
            .filter(|&o| self.var_t[o] > tiny)
            .map(|o| (self.cov[o] / (self.var_fs * self.var_t[o]).sqrt()).abs())
            .fold(T::zero(), T::max)
            .min(T::one())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchivedRule<T> {
    pub rule: Rule<T>,
    pub pruned_at: u64,
}

/// Pruned rules kept for possible recall, oldest evicted first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleArchive<T> {
    pub entries: VecDeque<ArchivedRule<T>>,
    pub cap: usize,
}

impl<T: Real> RuleArchive<T> {
    pub fn new(cap: usize) -> Self {
        Self { entries: VecDeque::new(), cap }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, rule: Rule<T>, pruned_at: u64) {
        if self.cap == 0 {
            return;
        }
        while self.entries.len() >= self.cap {
            self.entries.pop_front();
        }
        self.entries.push_back(ArchivedRule { rule, pruned_at });
    }
}

/// `exp(-χ²)` with `χ²` the upper `alpha` critical value for `p` degrees of freedom.
pub fn conflict_threshold(p: usize, alpha: f64) -> f64 {
    let chi = ChiSquared::new(p as f64).expect("positive degrees of freedom");
    (-chi.inverse_cdf(1.0 - alpha)).exp()
}

/// Expected contribution of a rule under the input density, L_u style.
///
/// For each centroid bound the rule's Gaussian, raised to `u`, is integrated
/// against every mixture component; the bounds are blended by `q`.
pub fn gt2dq_significance<T: Real>(rule: &Rule<T>, beta_norm: T, q: T, gmm: &GmmDensity<T>, u: T) -> Result<T> {
    if beta_norm == T::zero() {
        return Ok(T::zero());
    }
    let ch = rule
        .inv_cov
        .cholesky()
        .ok_or(Error::DegenerateCovariance("rule inverse covariance not SPD"))?;
    let cov = ch.inverse();
    let p = T::of(rule.dim() as f64);
    let two_pi = T::of(2.0) * T::PI();
    // (2π/u)^{p/2} det(Σ⁻¹)^{-1/2}
    let log_scale = p * T::of(0.5) * (two_pi / u).ln() - T::of(0.5) * ch.log_det();
    let scale = log_scale.exp();
    let part = |c: &[T]| -> Result<T> {
        let mut acc = T::zero();
        for k in 0..gmm.n_components() {
            acc = acc + gmm.weights[k] * convolve_with_cov(gmm, c, &cov, u, k)?;
        }
        Ok((scale * acc).powf(u.recip()))
    };
    let upper = part(&rule.c_upper)?;
    let lower = if rule.c_upper == rule.c_lower { upper } else { part(&rule.c_lower)? };
    Ok(beta_norm * ((T::one() - q) * upper + q * lower))
}

pub fn norm<T: Real>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

/// Bayesian winner: prior `N_i / Σ N` times crisp firing; lowest index wins ties.
pub fn select_winner<T: Real>(rules: &[Rule<T>], firings: &[IntervalFiring<T>], q: T) -> usize {
    let total = T::of(rules.iter().map(|r| r.n_pop).sum::<u64>() as f64);
    let mut best = (0, T::neg_infinity());
    for (i, (r, f)) in rules.iter().zip(firings).enumerate() {
        let post = T::of(r.n_pop as f64) / total * f.crisp(q);
        if post > best.1 {
            best = (i, post);
        }
    }
    best.0
}

/// Growth test on precomputed significances and compatibility.
pub fn should_grow<T: Real>(e_hyp: T, e_existing: &[T], compatibility: T, delta2: T) -> bool {
    let e_max = e_existing.iter().copied().fold(T::neg_infinity(), T::max);
    e_hyp >= e_max && compatibility <= delta2
}

/// Copies the winner's consequent and resets the RLS covariance to `ω I`.
pub fn init_consequent<T: Real>(winner: &Rule<T>, omega: T) -> (Matrix<T>, Matrix<T>) {
    let k = winner.rls_cov.rows();
    (winner.weights.clone(), Matrix::scaled_identity(k, omega))
}

/// Radius for a rule created at `x`: the larger distance to the two nearest
/// centroid midpoints over `sqrt(ln(1/ε))`. Falls back to `default` with no rules.
pub fn hypothetical_radius<T: Real>(rules: &[Rule<T>], x: &[T], epsilon: T, default: T, min_radius: T) -> T {
    if rules.is_empty() {
        return default;
    }
    let mut d: Vec<T> = rules.iter().map(|r| sq_dist(&r.center(), x).sqrt()).collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let far = if d.len() >= 2 { d[0].max(d[1]) } else { d[0] };
    (far / epsilon.recip().ln().sqrt()).max(min_radius)
}

/// Settings needed to build a candidate rule.
#[derive(Debug, Clone, Copy)]
pub struct RuleSeed<T> {
    pub delta: T,
    pub epsilon: T,
    pub omega: T,
    pub lambda: T,
    pub default_radius: T,
    pub min_radius: T,
}

/// Candidate rule at `x` with interval centroid `x ± Δ`, isotropic radius from
/// [`hypothetical_radius`] and consequent from the winner (zeros if none).
pub fn make_hypothetical<T: Real>(
    rules: &[Rule<T>],
    winner: Option<&Rule<T>>,
    x: &[T],
    seed: &RuleSeed<T>,
    id: u64,
    n_outputs: usize,
) -> Result<Rule<T>> {
    let p = x.len();
    let radius = hypothetical_radius(rules, x, seed.epsilon, seed.default_radius, seed.min_radius);
    let inv_cov = Matrix::scaled_identity(p, (radius * radius).recip());
    let (weights, rls_cov) = match winner {
        Some(w) => init_consequent(w, seed.omega),
        None => (Matrix::zeros(2 * p + 1, n_outputs), Matrix::scaled_identity(2 * p + 1, seed.omega)),
    };
    Rule::new(id, x, seed.delta, inv_cov, weights, rls_cov, seed.lambda, n_outputs)
}

/// Moves the winner toward `x` and updates its inverse covariance in place.
///
/// Returns `false` when the covariance step was skipped because the update
/// was not finite or not positive definite.
pub fn update_premise<T: Real>(rule: &mut Rule<T>, x: &[T]) -> bool {
    let n = T::of(rule.n_pop as f64);
    let alpha = (n + T::one()).recip();
    let center = rule.center();
    let dev: Vec<T> = x.iter().zip(&center).map(|(&a, &c)| a - c).collect();

    let ad = rule.inv_cov.mul_vec(&dev);
    let denom = T::one() + alpha * dot(&dev, &ad);
    let keep = T::one() - alpha;
    let mut cov_updated = false;
    if denom > T::zero() && denom.is_finite() {
        let mut next = rule.inv_cov.scale(keep.recip());
        next.add_outer(-(alpha / keep) / denom, &ad, &ad);
        next.symmetrize();
        if next.is_finite() && next.cholesky().is_some() {
            if let Ok(sigma) = crate::fuzzy::extract_radii(&next) {
                rule.inv_cov = next;
                rule.sigma = sigma;
                cov_updated = true;
            }
        }
    }
    if !cov_updated {
        log::debug!("rule {}: inverse covariance update skipped", rule.id);
    }

    for j in 0..x.len() {
        let shift = dev[j] * alpha;
        rule.c_lower[j] = rule.c_lower[j] + shift;
        rule.c_upper[j] = rule.c_upper[j] + shift;
    }
    rule.n_pop += 1;
    for (s, &v) in rule.coord_sum.iter_mut().zip(x) {
        *s = *s + v;
    }
    for (s, &v) in rule.sq_sum.iter_mut().zip(x) {
        *s = *s + v * v;
    }
    cov_updated
}

/// Updates every rule's utility statistics for one accepted sample.
pub fn record_utility<T: Real>(
    rules: &mut [Rule<T>],
    firings: &[IntervalFiring<T>],
    q: T,
    target: &[T],
    winner: usize,
    theta: T,
    decay: T,
) {
    for (i, (r, f)) in rules.iter_mut().zip(firings).enumerate() {
        r.util.push(f.crisp(q), target, decay);
        if r.util.utility() < theta {
            r.util.low_streak = r.util.low_streak.saturating_add(1);
        } else {
            r.util.low_streak = 0;
        }
        if i == winner {
            r.util.since_win = 0;
        } else {
            r.util.since_win = r.util.since_win.saturating_add(1);
        }
    }
}

/// Archives rules whose utility stayed low and which have not won for
/// `window` accepted samples. At least one rule always survives.
pub fn prune_rules<T: Real>(rules: &mut Vec<Rule<T>>, archive: &mut RuleArchive<T>, window: u32, now: u64) -> Vec<u64> {
    if rules.len() < 2 {
        return Vec::new();
    }
    let stale = |r: &Rule<T>| r.util.low_streak >= window && r.util.since_win >= window;
    let mut doomed: Vec<usize> = (0..rules.len()).filter(|&i| stale(&rules[i])).collect();
    if doomed.len() == rules.len() {
        // spare the most recent winner
        let keep = (0..rules.len()).min_by_key(|&i| rules[i].util.since_win).unwrap_or(0);
        doomed.retain(|&i| i != keep);
    }
    let mut pruned = Vec::with_capacity(doomed.len());
    for &i in doomed.iter().rev() {
        let r = rules.remove(i);
        pruned.push(r.id);
        archive.push(r, now);
    }
    pruned.reverse();
    pruned
}

/// Index of the live rule with the lowest utility; ties go to the stalest.
pub fn lowest_utility<T: Real>(rules: &[Rule<T>]) -> Option<usize> {
    rules
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            a.util
                .utility()
                .partial_cmp(&b.util.utility())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.util.since_win.cmp(&a.util.since_win))
        })
        .map(|(i, _)| i)
}

/// Scans the archive for a rule that covers `x` (crisp firing above
/// `delta2`) and is at least as significant as the candidate. Returns the
/// archive position of the best-covering match.
#[allow(clippy::too_many_arguments)]
pub fn find_recall<T: Real>(
    archive: &RuleArchive<T>,
    x: &[T],
    x_e: &[T],
    q: T,
    delta2: T,
    gmm: &GmmDensity<T>,
    u: T,
    hypothetical_e: T,
) -> Result<Option<usize>> {
    let mut best: Option<(usize, T)> = None;
    for (k, entry) in archive.entries.iter().enumerate() {
        let fs = spatial_firing(&entry.rule, x).crisp(q);
        if fs <= delta2 {
            continue;
        }
        let e = gt2dq_significance(&entry.rule, norm(&entry.rule.consequent(x_e)), q, gmm, u)?;
        if e >= hypothetical_e && best.is_none_or(|(_, f)| fs > f) {
            best = Some((k, fs));
        }
    }
    Ok(best.map(|(k, _)| k))
}

/// Removes archive entry `k` and prepares it for reuse at `x`: pruning
/// counters reset, recurrent memory set to its current spatial firing.
pub fn reinstate<T: Real>(archive: &mut RuleArchive<T>, k: usize, x: &[T]) -> Rule<T> {
    let mut rule = archive.entries.remove(k).expect("valid archive index").rule;
    rule.util.low_streak = 0;
    rule.util.since_win = 0;
    let f = spatial_firing(&rule, x);
    rule.prev_psi_upper = f.r_upper;
    rule.prev_psi_lower = f.r_lower;
    rule
}
