//! Sliding-window ordinary least squares, the reference regressor the
//! engine is compared against.

use std::collections::VecDeque;

use evofuzz::linalg::Matrix;

/// Linear model `t ≈ [1, x] W` refitted on the most recent `window` samples.
#[derive(Debug, Clone)]
pub struct SlidingWindowLs {
    window: usize,
    ridge: f64,
    buf: VecDeque<(Vec<f64>, Vec<f64>)>,
}

impl SlidingWindowLs {
    pub fn new(window: usize) -> Self {
        Self { window: window.max(1), ridge: 1e-8, buf: VecDeque::new() }
    }

    /// Fit on the current window and predict `x`; zeros while empty.
    pub fn predict(&self, x: &[f64], m: usize) -> Vec<f64> {
        if self.buf.is_empty() {
            return vec![0.0; m];
        }
        let k = x.len() + 1;
        let mut gram = Matrix::scaled_identity(k, self.ridge);
        let mut rhs = vec![vec![0.0; k]; m];
        for (xi, ti) in &self.buf {
            let f = features(xi);
            gram.add_outer(1.0, &f, &f);
            for (o, r) in rhs.iter_mut().enumerate() {
                for (rj, fj) in r.iter_mut().zip(&f) {
                    *rj += fj * ti[o];
                }
            }
        }
        let f = features(x);
        match gram.cholesky() {
            Some(ch) => rhs.iter().map(|r| evofuzz::linalg::dot(&ch.solve(r), &f)).collect(),
            None => vec![0.0; m],
        }
    }

    pub fn learn(&mut self, x: &[f64], t: &[f64]) {
        if self.buf.len() == self.window {
            self.buf.pop_front();
        }
        self.buf.push_back((x.to_vec(), t.to_vec()));
    }
}

fn features(x: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(x.iter().copied()).collect()
}

/// Test-then-train RMSE of the baseline over a whole stream.
pub fn prequential_rmse(x: &[Vec<f64>], t: &[Vec<f64>], window: usize) -> f64 {
    let mut model = SlidingWindowLs::new(window);
    let mut sse = 0.0;
    let mut count = 0usize;
    for (xi, ti) in x.iter().zip(t) {
        let y = model.predict(xi, ti.len());
        sse += y.iter().zip(ti).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        count += ti.len();
        model.learn(xi, ti);
    }
    (sse / count.max(1) as f64).sqrt()
}
