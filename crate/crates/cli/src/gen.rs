//! Seeded synthetic streams with ground-truth regime labels.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Clusters,
    PiecewiseLinear,
    GradualDrift,
    AbruptDrift,
    CyclicAba,
    RedundantDuplicates,
}

impl StreamKind {
    pub const ALL: [StreamKind; 6] = [
        StreamKind::Clusters,
        StreamKind::PiecewiseLinear,
        StreamKind::GradualDrift,
        StreamKind::AbruptDrift,
        StreamKind::CyclicAba,
        StreamKind::RedundantDuplicates,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StreamKind::Clusters => "clusters",
            StreamKind::PiecewiseLinear => "piecewise-linear",
            StreamKind::GradualDrift => "gradual-drift",
            StreamKind::AbruptDrift => "abrupt-drift",
            StreamKind::CyclicAba => "cyclic-aba",
            StreamKind::RedundantDuplicates => "redundant-duplicates",
        }
    }
}

impl fmt::Display for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownKind(pub String);

impl fmt::Display for UnknownKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = StreamKind::ALL.iter().map(|k| k.name()).collect();
        write!(f, "unknown stream kind {:?}, expected one of {}", self.0, names.join(", "))
    }
}

impl std::error::Error for UnknownKind {}

impl FromStr for StreamKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        StreamKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| UnknownKind(s.to_string()))
    }
}

/// Where drift happens, as fractions of the stream length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSpec {
    /// Midpoint of the drift (abrupt switch point, or centre of a gradual ramp).
    pub at: f64,
    /// Width of a gradual ramp.
    pub width: f64,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self { at: 0.5, width: 0.4 }
    }
}

/// A generated stream: inputs, targets and the regime each row came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub input_names: Vec<String>,
    pub target_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub t: Vec<Vec<f64>>,
    pub regime: Vec<String>,
}

impl Stream {
    fn new(p: usize) -> Self {
        Self {
            input_names: (1..=p).map(|j| format!("x{j}")).collect(),
            target_names: vec!["y".into()],
            x: Vec::new(),
            t: Vec::new(),
            regime: Vec::new(),
        }
    }

    fn push(&mut self, x: Vec<f64>, y: f64, regime: impl Into<String>) {
        self.x.push(x);
        self.t.push(vec![y]);
        self.regime.push(regime.into());
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// CSV text with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.input_names.iter().chain(&self.target_names).map(String::as_str).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for (x, t) in self.x.iter().zip(&self.t) {
            let row: Vec<String> = x.iter().chain(t).map(|v| format!("{v:?}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Side file: `index,regime` per row.
    pub fn regimes_csv(&self) -> String {
        let mut out = String::from("index,regime\n");
        for (i, r) in self.regime.iter().enumerate() {
            out.push_str(&format!("{i},{r}\n"));
        }
        out
    }
}

const NOISE: f64 = 0.02;

pub fn generate(kind: StreamKind, n: usize, seed: u64, drift: DriftSpec) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        StreamKind::Clusters => clusters(n, &mut rng),
        StreamKind::PiecewiseLinear => piecewise_linear(n, &mut rng),
        StreamKind::GradualDrift => gradual_drift(n, drift, &mut rng),
        StreamKind::AbruptDrift => abrupt_drift(n, drift, &mut rng),
        StreamKind::CyclicAba => cyclic_aba(n, &mut rng),
        StreamKind::RedundantDuplicates => redundant_duplicates(n, &mut rng),
    }
}

fn noise(rng: &mut ChaCha8Rng) -> f64 {
    Normal::new(0.0, NOISE).expect("valid sd").sample(rng)
}

/// Three well separated Gaussian blobs in 2-D, each with its own plane.
fn clusters(n: usize, rng: &mut ChaCha8Rng) -> Stream {
    let centres = [[-3.0, -3.0], [0.0, 3.0], [3.0, -2.0]];
    let planes = [[1.0, 0.5, -1.0], [-0.8, 0.3, 2.0], [0.4, -1.2, 0.5]];
    let spread = Normal::new(0.0, 0.5).expect("valid sd");
    let mut s = Stream::new(2);
    for i in 0..n {
        // clusters come into play one at a time over the first third
        let active = (1 + 6 * i / n.max(1)).min(3);
        let k = rng.random_range(0..active);
        let x = vec![centres[k][0] + spread.sample(rng), centres[k][1] + spread.sample(rng)];
        let [a, b, c] = planes[k];
        let y = a * x[0] + b * x[1] + c + noise(rng);
        s.push(x, y, format!("cluster{k}"));
    }
    s
}

/// `x ~ U[-1, 1]` through a continuous three-segment line.
fn piecewise_linear(n: usize, rng: &mut ChaCha8Rng) -> Stream {
    let mut s = Stream::new(1);
    for _ in 0..n {
        let x: f64 = rng.random_range(-1.0..1.0);
        let (y, seg) = if x < -1.0 / 3.0 {
            (2.0 * x + 1.0, 0)
        } else if x < 1.0 / 3.0 {
            (-x, 1)
        } else {
            (1.5 * x - 5.0 / 6.0, 2)
        };
        s.push(vec![x], y + noise(rng), format!("segment{seg}"));
    }
    s
}

fn concept_a(x: &[f64]) -> f64 {
    0.8 * x[0] - 0.5 * x[1] + 0.3 * (2.0 * x[0]).sin()
}

fn concept_b(x: &[f64]) -> f64 {
    -0.6 * x[0] + 0.9 * x[1] - 0.4 * (2.0 * x[1]).cos()
}

/// Concept A gives way to concept B over a ramp: inside it each row comes
/// from B with a probability rising linearly from 0 to 1.
fn gradual_drift(n: usize, drift: DriftSpec, rng: &mut ChaCha8Rng) -> Stream {
    let mut s = Stream::new(2);
    let (lo, hi) = (drift.at - drift.width / 2.0, drift.at + drift.width / 2.0);
    for i in 0..n {
        let frac = i as f64 / n.max(1) as f64;
        let p_b = if hi <= lo { f64::from(frac >= drift.at) } else { ((frac - lo) / (hi - lo)).clamp(0.0, 1.0) };
        let x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let b = rng.random::<f64>() < p_b;
        let y = if b { concept_b(&x) } else { concept_a(&x) };
        s.push(x, y + noise(rng), if b { "B" } else { "A" });
    }
    s
}

/// Both the input region and the target function switch at one point.
fn abrupt_drift(n: usize, drift: DriftSpec, rng: &mut ChaCha8Rng) -> Stream {
    let mut s = Stream::new(2);
    let switch = (drift.at * n as f64).round() as usize;
    for i in 0..n {
        let b = i >= switch;
        let (x, y) = regime_sample(b, rng);
        s.push(x, y, if b { "B" } else { "A" });
    }
    s
}

/// Concept A lives around `(-0.5, -0.5)`, concept B around `(0.5, 0.5)`.
fn regime_sample(b: bool, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let spread = Normal::new(0.0, 0.15).expect("valid sd");
    let c = if b { 0.5 } else { -0.5 };
    let x = vec![c + spread.sample(rng), c + spread.sample(rng)];
    let y = if b { concept_b(&x) } else { concept_a(&x) } + noise(rng);
    (x, y)
}

/// Regimes A, B, A in equal thirds.
fn cyclic_aba(n: usize, rng: &mut ChaCha8Rng) -> Stream {
    let mut s = Stream::new(2);
    // the first sample of each corner pins the scaler range early
    s.push(vec![-1.0, -1.0], concept_a(&[-1.0, -1.0]), "A");
    s.push(vec![1.0, 1.0], concept_a(&[1.0, 1.0]), "A");
    let third = n / 3;
    for i in 2..n {
        let b = i >= third && i < n - third;
        let (x, y) = regime_sample(b, rng);
        s.push(x, y, if b { "B" } else { "A" });
    }
    s.x.truncate(n);
    s.t.truncate(n);
    s.regime.truncate(n);
    s
}

/// The first 20% of rows are fresh draws from the cluster fixture; every
/// later row repeats one of them exactly.
fn redundant_duplicates(n: usize, rng: &mut ChaCha8Rng) -> Stream {
    let fresh = (n / 5).max(1).min(n);
    let base = clusters(fresh, rng);
    let mut s = Stream::new(2);
    for i in 0..fresh {
        s.push(base.x[i].clone(), base.t[i][0], "fresh");
    }
    for _ in fresh..n {
        let k = rng.random_range(0..fresh);
        s.push(base.x[k].clone(), base.t[k][0], "repeat");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_bytes() {
        for kind in StreamKind::ALL {
            let a = generate(kind, 300, 7, DriftSpec::default());
            let b = generate(kind, 300, 7, DriftSpec::default());
            assert_eq!(a.to_csv(), b.to_csv(), "{kind}");
            assert_eq!(a.len(), 300);
        }
    }

    #[test]
    fn cyclic_thirds() {
        let s = generate(StreamKind::CyclicAba, 300, 1, DriftSpec::default());
        assert!(s.regime[..100].iter().all(|r| r == "A"));
        assert!(s.regime[100..200].iter().all(|r| r == "B"));
        assert!(s.regime[200..].iter().all(|r| r == "A"));
    }

    #[test]
    fn duplicates_repeat_the_prefix() {
        let s = generate(StreamKind::RedundantDuplicates, 500, 3, DriftSpec::default());
        let head = &s.x[..100];
        assert!(s.x[100..].iter().all(|x| head.contains(x)));
        let repeats = s.regime.iter().filter(|r| *r == "repeat").count();
        assert_eq!(repeats, 400);
    }

    #[test]
    fn kind_names_roundtrip() {
        for kind in StreamKind::ALL {
            assert_eq!(kind.name().parse::<StreamKind>().unwrap(), kind);
        }
        assert!("spiral".parse::<StreamKind>().is_err());
        assert_eq!("Cyclic_ABA".parse::<StreamKind>().unwrap(), StreamKind::CyclicAba);
    }
}
