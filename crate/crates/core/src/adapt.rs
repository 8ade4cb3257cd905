//! Parameter adaptation.
//!
//! Consequents follow a per-rule, firing-weighted recursive least squares with
//! quadratic weight decay. The design factors `q` and the recurrent weights
//! `λ` follow stochastic gradient steps scaled by the Parzen estimate of the
//! error density at zero, with a learning rate that grows while that estimate
//! rises and shrinks otherwise, capped by the Lyapunov bound.

use serde::{Deserialize, Serialize};

use crate::fuzzy::{Inference, Rule};
use crate::linalg::dot;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZedmState<T> {
    pub eta_q: T,
    pub eta_lambda: T,
    /// Running sum of `exp(-e²/2τ²)`.
    pub a_n: T,
    pub f_prev: Option<T>,
    pub n_seen: u64,
    pub delta3: T,
    pub delta4: T,
    pub tau: T,
    /// Largest gradient magnitudes observed so far.
    pub p0_q: T,
    pub p0_lambda: T,
}

impl<T: Real> ZedmState<T> {
    pub fn new(eta_q: T, eta_lambda: T, delta3: T, delta4: T, tau: T) -> Self {
        Self {
            eta_q,
            eta_lambda,
            a_n: T::zero(),
            f_prev: None,
            n_seen: 0,
            delta3,
            delta4,
            tau,
            p0_q: T::zero(),
            p0_lambda: T::zero(),
        }
    }

    /// `2 N sqrt(2π) / (P0² A_N)`; infinite until a gradient has been seen.
    pub fn stability_bound(&self, p0: T) -> T {
        if !(p0 > T::zero()) || !(self.a_n > T::zero()) {
            return T::infinity();
        }
        let n = T::of(self.n_seen as f64);
        T::of(2.0) * n * (T::of(2.0) * T::PI()).sqrt() / (p0 * p0 * self.a_n)
    }

    /// `A_N / (N sqrt(2π))`, the factor both gradient steps are scaled by.
    pub fn gradient_scale(&self) -> T {
        if self.n_seen == 0 {
            return T::zero();
        }
        self.a_n / (T::of(self.n_seen as f64) * (T::of(2.0) * T::PI()).sqrt())
    }
}

/// Adds one error to the Parzen accumulator and returns `f̂(0)`.
pub fn error_density_zero<T: Real>(state: &mut ZedmState<T>, e_sq: T) -> T {
    state.a_n = state.a_n + (-e_sq / (T::of(2.0) * state.tau * state.tau)).exp();
    state.n_seen += 1;
    state.a_n / (T::of(state.n_seen as f64) * state.tau * (T::of(2.0) * T::PI()).sqrt())
}

/// Gradients of `½|y - t|²` with respect to each `q_o` and each rule's `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub dq: Vec<T>,
    pub dlambda: Vec<T>,
}

/// Exact gradients through the type reduction and the recurrent blend.
/// `error = y - t`; `∂ψ/∂λ = R - ψ_prev`.
pub fn gradients<T: Real>(inf: &Inference<T>, q: &[T], error: &[T]) -> Gradients<T> {
    let r = inf.firings.len();
    let m = q.len();
    if inf.fallback.is_some() {
        return Gradients { dq: vec![T::zero(); m], dlambda: vec![T::zero(); r] };
    }
    let lower_ok = !inf.lower_degenerate();
    let dq = (0..m)
        .map(|o| if lower_ok { error[o] * (inf.lower_mean[o] - inf.upper_mean[o]) } else { T::zero() })
        .collect();
    let dlambda = (0..r)
        .map(|i| {
            let f = &inf.firings[i];
            let (prev_u, prev_l) = inf.prev_memory[i];
            let du = f.r_upper - prev_u;
            let dl = f.r_lower - prev_l;
            (0..m)
                .map(|o| {
                    let beta = inf.betas[i][o];
                    let dy = if lower_ok {
                        (T::one() - q[o]) * (beta - inf.upper_mean[o]) / inf.sum_upper * du
                            + q[o] * (beta - inf.lower_mean[o]) / inf.sum_lower * dl
                    } else {
                        (beta - inf.upper_mean[o]) / inf.sum_upper * du
                    };
                    error[o] * dy
                })
                .sum()
        })
        .collect();
    Gradients { dq, dlambda }
}

/// What one adaptation step did.
#[derive(Debug, Clone, PartialEq)]
pub struct ZedmOutcome<T> {
    pub f0: T,
    pub grads: Gradients<T>,
}

/// One ZEDM step: accumulate the error density, descend on `q` and `λ`,
/// clamp both to `[0, 1]`, then adapt the learning rates.
///
/// `lambdas[i]` is the recurrent weight of the rule at position `i` of `inf`.
pub fn zedm_step<T: Real>(
    q: &mut [T],
    lambdas: &mut [T],
    state: &mut ZedmState<T>,
    inf: &Inference<T>,
    error: &[T],
) -> ZedmOutcome<T> {
    let f0 = error_density_zero(state, dot(error, error));
    let scale = state.gradient_scale();
    let grads = gradients(inf, q, error);
    let (z, o) = (T::zero(), T::one());
    for (qo, &g) in q.iter_mut().zip(&grads.dq) {
        *qo = (*qo - state.eta_q * scale * g).max(z).min(o);
        state.p0_q = state.p0_q.max(g.abs());
    }
    for (lam, &g) in lambdas.iter_mut().zip(&grads.dlambda) {
        *lam = (*lam - state.eta_lambda * scale * g).max(z).min(o);
        state.p0_lambda = state.p0_lambda.max(g.abs());
    }
    adapt_learning_rate(state, f0);
    ZedmOutcome { f0, grads }
}

/// Multiplies the learning rates by `δ3` when `f̂(0)` did not fall and by `δ4`
/// when it did, then clamps them below the stability bound.
pub fn adapt_learning_rate<T: Real>(state: &mut ZedmState<T>, f_now: T) {
    if let Some(prev) = state.f_prev {
        let factor = if f_now >= prev { state.delta3 } else { state.delta4 };
        state.eta_q = state.eta_q * factor;
        state.eta_lambda = state.eta_lambda * factor;
    }
    state.f_prev = Some(f_now);
    let shrink = T::one() - T::of(1e-6);
    let floor = T::of(1e-12);
    let bq = state.stability_bound(state.p0_q);
    let bl = state.stability_bound(state.p0_lambda);
    state.eta_q = state.eta_q.min(bq * shrink).max(floor.min(bq * shrink));
    state.eta_lambda = state.eta_lambda.min(bl * shrink).max(floor.min(bl * shrink));
}

/// One fuzzily weighted RLS update of a single rule.
///
/// `firing` is the rule's normalized firing; a smaller value inflates the
/// effective noise `1/firing` and so damps the step. Returns `false` and
/// leaves the rule untouched when the update is not finite.
pub fn fwgrls_step<T: Real>(rule: &mut Rule<T>, x_e: &[T], target: &[T], firing: T, decay: T) -> bool {
    if !(firing > T::zero()) {
        return false;
    }
    let px = rule.rls_cov.mul_vec(x_e);
    let denom = firing.recip() + dot(x_e, &px);
    if !(denom > T::zero()) || !denom.is_finite() {
        log::debug!("rule {}: fwgrls skipped, bad gain denominator", rule.id);
        return false;
    }
    let gain: Vec<T> = px.iter().map(|&v| v / denom).collect();

    let mut cov = rule.rls_cov.clone();
    cov.add_outer(-T::one(), &gain, &px);
    cov.symmetrize();

    let pred = rule.weights.vec_mul(x_e);
    let mut weights = rule.weights.clone();
    if decay != T::zero() {
        let pw = cov.mul(&rule.weights);
        for (w, d) in weights.as_mut_slice().iter_mut().zip(pw.as_slice()) {
            *w = *w - decay * *d;
        }
    }
    let innov: Vec<T> = target.iter().zip(&pred).map(|(&t, &y)| t - y).collect();
    weights.add_outer(T::one(), &gain, &innov);

    if !cov.is_finite() || !weights.is_finite() {
        log::debug!("rule {}: fwgrls skipped, non-finite update", rule.id);
        return false;
    }
    rule.rls_cov = cov;
    rule.weights = weights;
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzy::{chebyshev_expand, evaluate};
    use crate::linalg::Matrix;

    fn state() -> ZedmState<f64> {
        ZedmState::new(0.01, 0.01, 1.1, 0.9, 1.0)
    }

    fn rule_1d(c: f64, w: &[f64]) -> Rule<f64> {
        Rule::new(
            0,
            &[c],
            0.1,
            Matrix::from_diag(&[4.0]),
            Matrix::from_row_major(3, 1, w.to_vec()),
            Matrix::scaled_identity(3, 1e5),
            0.5,
            1,
        )
        .unwrap()
    }

    #[test]
    fn density_of_perfect_fit() {
        let mut s = state();
        for _ in 0..10 {
            let f = error_density_zero(&mut s, 0.0);
            assert!((f - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn density_hand_summation() {
        let mut s = state();
        let mut f = 0.0;
        for e in [0.0f64, 1.0, 2.0] {
            f = error_density_zero(&mut s, e * e);
        }
        let a3 = 1.0 + (-0.5f64).exp() + (-2.0f64).exp();
        assert!((s.a_n - a3).abs() < 1e-15);
        assert!((s.a_n - 1.7419).abs() < 1e-4);
        assert!((f - 0.2316).abs() < 1e-4);
    }

    #[test]
    fn density_decays_for_huge_errors() {
        let mut s = state();
        error_density_zero(&mut s, 0.0);
        let a = s.a_n;
        let f = error_density_zero(&mut s, 1e6);
        assert_eq!(s.a_n, a);
        assert!((f - a / (2.0 * (2.0 * std::f64::consts::PI).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn zero_error_moves_nothing() {
        let rules = vec![rule_1d(-0.3, &[1.0, 0.5, 0.0]), rule_1d(0.4, &[-1.0, 2.0, 0.3])];
        let mut q = vec![0.5];
        let inf = evaluate(&rules, &q, &[0.1]).unwrap();
        let mut lambdas: Vec<f64> = rules.iter().map(|r| r.lambda).collect();
        let mut s = state();
        zedm_step(&mut q, &mut lambdas, &mut s, &inf, &[0.0]);
        assert_eq!(q, vec![0.5]);
        assert_eq!(lambdas, vec![0.5, 0.5]);
    }

    #[test]
    fn equal_bound_means_give_zero_q_gradient() {
        let a = rule_1d(0.0, &[2.0, 0.0, 0.0]);
        let inf = evaluate(std::slice::from_ref(&a), &[0.3], &[0.7]).unwrap();
        let g = gradients(&inf, &[0.3], &[1.5]);
        assert_eq!(g.dq, vec![0.0]);
    }

    #[test]
    fn learning_rate_growth_and_decay() {
        let mut s = state();
        s.f_prev = Some(0.1);
        for f in [0.2, 0.3, 0.4] {
            adapt_learning_rate(&mut s, f);
        }
        assert!((s.eta_q / 0.01 - 1.331).abs() < 1e-12);
        adapt_learning_rate(&mut s, 0.1);
        assert!((s.eta_q / 0.01 - 1.331 * 0.9).abs() < 1e-12);
    }

    #[test]
    fn learning_rate_clamped_by_bound() {
        let mut s = state();
        s.n_seen = 3;
        s.a_n = 2.5;
        s.p0_q = 40.0;
        s.p0_lambda = 0.01;
        s.eta_q = 5.0;
        s.f_prev = Some(0.0);
        adapt_learning_rate(&mut s, 1.0);
        let bound = s.stability_bound(40.0);
        assert!(s.eta_q <= bound && s.eta_q > 0.0);
        assert!((s.eta_lambda - 0.011).abs() < 1e-15);
    }

    #[test]
    fn rls_zero_innovation_keeps_weights() {
        let mut r = rule_1d(0.0, &[0.3, -1.2, 0.8]);
        let x_e = chebyshev_expand(&[0.4]);
        let t = r.consequent(&x_e);
        let before = r.weights.clone();
        let tr = r.rls_cov.trace();
        assert!(fwgrls_step(&mut r, &x_e, &t, 1.0, 0.0));
        assert_eq!(r.weights, before);
        assert!(r.rls_cov.trace() < tr);
    }

    #[test]
    fn rls_recovers_slope() {
        let mut r = rule_1d(0.0, &[0.0, 0.0, 0.0]);
        let mut last = r.rls_cov.trace();
        for n in 0..200 {
            let x = ((n * 37 % 200) as f64) / 100.0 - 1.0;
            let x_e = chebyshev_expand(&[x]);
            fwgrls_step(&mut r, &x_e, &[2.0 * x], 1.0, 0.0);
            let tr = r.rls_cov.trace();
            assert!(tr <= last);
            last = tr;
        }
        assert!((r.weights[(1, 0)] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn weight_decay_shrinks_norm_without_information() {
        let mut r = rule_1d(0.0, &[3.0, -2.0, 1.0]);
        let mut last = r.weights.frobenius_norm();
        for n in 0..50 {
            let x_e = chebyshev_expand(&[(n as f64 * 0.3).sin()]);
            let t = r.consequent(&x_e);
            fwgrls_step(&mut r, &x_e, &t, 1e-9, 1e-7);
            let now = r.weights.frobenius_norm();
            assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn rls_skips_non_finite() {
        let mut r = rule_1d(0.0, &[0.0, 0.0, 0.0]);
        let before = r.clone();
        assert!(!fwgrls_step(&mut r, &[1.0, f64::NAN, 0.0], &[1.0], 1.0, 0.0));
        assert_eq!(r, before);
        assert!(!fwgrls_step(&mut r, &[1.0, 0.0, 0.0], &[1.0], 0.0, 0.0));
    }
}
