//! Entropy-of-neighbourhood sample selection.
//!
//! Each rule keeps the count, coordinate sum and squared-norm sum of the
//! samples it absorbed, which is enough to recover the mean squared distance
//! from any new point to that population without revisiting it.

use serde::{Deserialize, Serialize};

use crate::fuzzy::Rule;
use crate::scalar::Real;

/// Acceptance threshold and its multiplicative step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateState<T> {
    pub delta1: T,
    pub step: T,
    pub floor: T,
    /// Largest rule count seen so far, drives the upper cap on `delta1`.
    pub r_max_seen: usize,
}

impl<T: Real> GateState<T> {
    pub fn new(delta1: T, step: T) -> Self {
        Self { delta1, step, floor: T::of(1e-4), r_max_seen: 1 }
    }

    fn cap(&self) -> T {
        T::of((self.r_max_seen.max(1) as f64).ln() + 1.0)
    }

    pub fn observe_rule_count(&mut self, r: usize) {
        self.r_max_seen = self.r_max_seen.max(r);
    }

    /// Accepts iff `entropy >= delta1`, then raises the threshold after an
    /// accept and lowers it after a reject.
    pub fn decide(&mut self, entropy: T) -> bool {
        let accept = entropy >= self.delta1;
        let factor = if accept { T::one() + self.step } else { T::one() - self.step };
        self.delta1 = (self.delta1 * factor).max(self.floor).min(self.cap());
        accept
    }
}

/// Mean squared Euclidean distance from `x` to the rule's absorbed samples,
/// `(N |x|² - 2 x·Σx_n + Σ|x_n|²) / N`.
pub fn local_density<T: Real>(rule: &Rule<T>, x: &[T]) -> T {
    let n = T::of(rule.n_pop as f64);
    let xx: T = x.iter().map(|&v| v * v).sum();
    let xs: T = x.iter().zip(&rule.coord_sum).map(|(&a, &b)| a * b).sum();
    let d = (n * xx - T::of(2.0) * xs + rule.sq_sum.iter().copied().sum::<T>()) / n;
    d.max(T::zero())
}

/// Probability that `x` belongs to each rule's neighbourhood.
///
/// A rule's similarity to `x` is `1 / (1 + mean squared distance)`, so the
/// entropy is high for points between or far from all rules.
pub fn neighborhood_probability<T: Real>(rules: &[Rule<T>], x: &[T]) -> Vec<T> {
    let sims: Vec<T> = rules.iter().map(|r| (T::one() + local_density(r, x)).recip())
        .collect();
    let total: T = sims.iter().copied().sum();
    if !(total > T::zero()) || !total.is_finite() {
        let u = T::one() / T::of(rules.len().max(1) as f64);
        return vec![u; rules.len()];
    }
    sims.into_iter().map(|s| s / total).collect()
}

/// `-Σ P ln P` with `0 ln 0 = 0`.
pub fn esem_entropy<T: Real>(p: &[T]) -> T {
    p.iter()
        .filter(|&&v| v > T::zero())
        .map(|&v| -v * v.ln())
        .sum::<T>()
        .max(T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn rule_with_population(points: &[Vec<f64>]) -> Rule<f64> {
        let p = points[0].len();
        let mut r = Rule::new(
            0,
            &points[0],
            0.0,
            Matrix::identity(p),
            Matrix::zeros(2 * p + 1, 1),
            Matrix::identity(2 * p + 1),
            0.5,
            1,
        )
        .unwrap();
        for pt in &points[1..] {
            r.n_pop += 1;
            for (s, v) in r.coord_sum.iter_mut().zip(pt) {
                *s += v;
            }
            for (s, v) in r.sq_sum.iter_mut().zip(pt) {
                *s += v * v;
            }
        }
        r
    }

    fn brute_density(points: &[Vec<f64>], x: &[f64]) -> f64 {
        points.iter().map(|pt| crate::linalg::sq_dist(pt, x)).sum::<f64>() / points.len() as f64
    }

    #[test]
    fn reexpressed_accumulators_track_mapped_points() {
        let pts = vec![vec![0.3, -0.2], vec![-0.7, 0.4], vec![0.1, 0.9]];
        let mut r = rule_with_population(&pts);
        let (a, b) = ([0.5, 0.8], [-0.3, 0.1]);
        r.reexpress(&a, &b).unwrap();
        let mapped: Vec<Vec<f64>> = pts.iter().map(|p| vec![a[0] * p[0] + b[0], a[1] * p[1] + b[1]]).collect();
        let x = [0.2, -0.5];
        assert!((local_density(&r, &x) - brute_density(&mapped, &x)).abs() < 1e-12);
    }

    #[test]
    fn density_of_own_point_is_zero() {
        let r = rule_with_population(&[vec![0.3, -0.2]]);
        assert!(local_density(&r, &[0.3, -0.2]).abs() < 1e-15);
    }

    #[test]
    fn density_symmetric_pair() {
        let r = rule_with_population(&[vec![0.0], vec![2.0]]);
        assert!((local_density(&r, &[1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn density_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec<f64>> = (0..50).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let r = rule_with_population(&pts);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        assert!((local_density(&r, &x) - brute_density(&pts, &x)).abs() < 1e-9);
    }

    #[test]
    fn probability_cases() {
        let a = rule_with_population(&[vec![0.0, 0.0]]);
        assert_eq!(neighborhood_probability(std::slice::from_ref(&a), &[5.0, 5.0]), vec![1.0]);

        let b = rule_with_population(&[vec![2.0, 0.0]]);
        let p = neighborhood_probability(&[a.clone(), b], &[1.0, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);

        // rule 2 at squared distance 10 > 9
        let far = rule_with_population(&[vec![3.0, 1.0]]);
        let p = neighborhood_probability(&[a, far], &[0.0, 0.0]);
        assert!(p[0] > 0.9);
        assert!((p[0] - 1.0 / (1.0 + 1.0 / 11.0)).abs() < 1e-15);
    }

    #[test]
    fn probability_ignores_population_size() {
        let small = rule_with_population(&[vec![-1.0]]);
        let big = rule_with_population(&vec![vec![1.0]; 40]);
        let p = neighborhood_probability(&[small, big], &[0.0]);
        assert!((p[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(esem_entropy(&[1.0f64]), 0.0);
        assert!((esem_entropy(&[0.5f64, 0.5]) - 2f64.ln()).abs() < 1e-15);
        assert!((esem_entropy(&[0.5f64, 0.5]) - 0.6931).abs() < 1e-4);
        let u = vec![0.125f64; 8];
        assert!((esem_entropy(&u) - 8f64.ln()).abs() < 1e-14);
        assert_eq!(esem_entropy(&[0.0f64, 1.0]), 0.0);
    }

    #[test]
    fn gate_threshold_adjusts() {
        let mut g = GateState::new(0.5f64, 0.01);
        g.observe_rule_count(4);
        assert!(g.decide(0.7));
        assert!((g.delta1 - 0.505).abs() < 1e-15);

        let mut g = GateState::new(0.5f64, 0.01);
        g.observe_rule_count(4);
        assert!(!g.decide(0.3));
        assert!((g.delta1 - 0.495).abs() < 1e-15);

        let mut g = GateState::new(0.5f64, 0.01);
        g.observe_rule_count(4);
        assert!(g.decide(10.0));
        assert!(!g.decide(0.0));
        assert!(((g.delta1 - 0.5) / 0.5).abs() < 1e-4);
    }

    #[test]
    fn gate_threshold_stays_within_floor_and_cap() {
        let mut g = GateState::new(0.3f64, 0.01);
        for _ in 0..5000 {
            g.decide(-1.0);
        }
        assert!((g.delta1 - 1e-4).abs() < 1e-15);
        g.observe_rule_count(3);
        for _ in 0..5000 {
            g.decide(100.0);
        }
        assert!((g.delta1 - (3f64.ln() + 1.0)).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pop() -> impl Strategy<Value = Vec<Vec<f64>>> {
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..8)
        }

        proptest! {
            #[test]
            fn probabilities_sum_to_one_and_entropy_bounded(
                pops in prop::collection::vec(pop(), 1..6),
                x in prop::collection::vec(-4.0f64..4.0, 2),
            ) {
                let rules: Vec<_> = pops.iter().map(|p| rule_with_population(p)).collect();
                let p = neighborhood_probability(&rules, &x);
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(p.iter().all(|&v| v >= 0.0));
                let h = esem_entropy(&p);
                prop_assert!(h >= 0.0 && h <= (rules.len() as f64).ln() + 1e-12);
            }
        }
    }
}
