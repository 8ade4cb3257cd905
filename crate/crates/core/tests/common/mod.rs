#![allow(dead_code)]

use evofuzz::linalg::Matrix;
use evofuzz::Rule;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn spd(rng: &mut ChaCha8Rng, p: usize, ridge: f64) -> Matrix<f64> {
    let b: Vec<f64> = (0..p * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut a = Matrix::scaled_identity(p, ridge);
    for i in 0..p {
        for j in 0..p {
            a[(i, j)] += (0..p).map(|k| b[i * p + k] * b[j * p + k]).sum::<f64>();
        }
    }
    a
}

/// A rule with random premise, consequent and recurrent state.
pub fn random_rule(rng: &mut ChaCha8Rng, id: u64, p: usize, m: usize) -> Rule<f64> {
    let center: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let delta = rng.random_range(0.0..0.2);
    let inv = spd(rng, p, 1.0);
    let k = 2 * p + 1;
    let w: Vec<f64> = (0..k * m).map(|_| rng.random_range(-2.0..2.0)).collect();
    let lambda = rng.random_range(0.0..1.0);
    let mut r = Rule::new(
        id,
        &center,
        delta,
        inv,
        Matrix::from_row_major(k, m, w),
        Matrix::scaled_identity(k, 1e5),
        lambda,
        m,
    )
    .unwrap();
    let a: f64 = rng.random_range(0.0..1.0);
    let b: f64 = rng.random_range(0.0..1.0);
    r.prev_psi_upper = a.max(b);
    r.prev_psi_lower = a.min(b);
    r
}

pub fn random_rules(rng: &mut ChaCha8Rng, count: usize, p: usize, m: usize) -> Vec<Rule<f64>> {
    (0..count).map(|i| random_rule(rng, i as u64 + 1, p, m)).collect()
}

pub fn random_point(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()
}
