//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line to
//! stderr (outside the test harness capture) before asserting.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use evofuzz::adapt::{error_density_zero, gradients, ZedmState};
use evofuzz::fuzzy::{evaluate, interval_membership, spatial_firing};
use evofuzz::gate::local_density;
use evofuzz::linalg::{sq_dist, Matrix};
use evofuzz::rules::update_premise;
use evofuzz::{EngineConfig, Model, Rule};
use evofuzz_cli::baseline::prequential_rmse;
use evofuzz_cli::data::Dataset;
use evofuzz_cli::gen::{generate, DriftSpec, Stream, StreamKind};
use evofuzz_cli::protocol::test_then_train;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SEED: u64 = 42;
const BASELINE_WINDOW: usize = 100;

fn verdict(n: u32, name: &str, pass: bool, detail: String) {
    let line = format!("criterion {n:>2} {:<4} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
}

fn spd(rng: &mut ChaCha8Rng, p: usize) -> Matrix<f64> {
    let b: Vec<f64> = (0..p * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut a = Matrix::identity(p);
    for i in 0..p {
        for j in 0..p {
            a[(i, j)] += (0..p).map(|k| b[i * p + k] * b[j * p + k]).sum::<f64>();
        }
    }
    a
}

fn random_rule(rng: &mut ChaCha8Rng, id: u64, p: usize, m: usize) -> Rule<f64> {
    let center: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let k = 2 * p + 1;
    let w: Vec<f64> = (0..k * m).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut r = Rule::new(
        id,
        &center,
        rng.random_range(0.0..0.2),
        spd(rng, p),
        Matrix::from_row_major(k, m, w),
        Matrix::scaled_identity(k, 1e5),
        rng.random_range(0.0..1.0),
        m,
    )
    .unwrap();
    let (a, b): (f64, f64) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
    r.prev_psi_upper = a.max(b);
    r.prev_psi_lower = a.min(b);
    r
}

fn point(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dataset(s: &Stream) -> Dataset {
    Dataset {
        input_names: s.input_names.clone(),
        target_names: s.target_names.clone(),
        x: s.x.clone(),
        t: s.t.clone(),
        rows: (0..s.len()).collect(),
        skipped_rows: 0,
    }
}

/// Runs the engine prequentially; returns the model and per-sample squared errors.
fn prequential(cfg: EngineConfig, s: &Stream) -> (Model, Vec<Option<f64>>) {
    let out = test_then_train(&cfg, &dataset(s)).unwrap();
    let errs = out.records.iter().map(|r| r.sq_error).collect();
    (out.models.into_iter().next().unwrap().1, errs)
}

fn rmse(errs: &[Option<f64>]) -> f64 {
    let v: Vec<f64> = errs.iter().flatten().copied().collect();
    (v.iter().sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn c01_interval_ordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut violations = 0usize;
    for n in 0..100_000u64 {
        let p = 1 + (n % 4) as usize;
        let rule = random_rule(&mut rng, n, p, 1);
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
        for j in 0..p {
            let (u, l) = interval_membership(x[j], rule.c_lower[j], rule.c_upper[j], rule.sigma[j]);
            violations += usize::from(!(l <= u));
        }
        let f = spatial_firing(&rule, &x);
        violations += usize::from(!(f.r_lower <= f.r_upper));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(1, "interval ordering", violations == 0 && secs < 5.0, format!("{violations} violations in 1e5 pairs, {secs:.2} s (limit 5 s)"));
}

#[test]
fn c02_recursions_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = 3;
    let first = point(&mut rng, p);
    let mut rule = Rule::new(1, &first, 0.1, Matrix::identity(p), Matrix::zeros(2 * p + 1, 1), Matrix::identity(2 * p + 1), 0.5, 1)
        .unwrap();
    let mut points = vec![first];
    let tau = 1.0;
    let mut zedm = ZedmState::new(0.01, 0.01, 1.1, 0.9, tau);
    let mut errors = Vec::new();
    let (mut worst_density, mut worst_acc) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let q = point(&mut rng, p);
        let brute = points.iter().map(|pt| sq_dist(pt, &q)).sum::<f64>() / points.len() as f64;
        worst_density = worst_density.max((local_density(&rule, &q) - brute).abs());
        let x = point(&mut rng, p);
        update_premise(&mut rule, &x);
        points.push(x);

        let e: f64 = rng.random_range(-3.0..3.0);
        errors.push(e);
        let f0 = error_density_zero(&mut zedm, e * e);
        let a: f64 = errors.iter().map(|e| (-e * e / (2.0 * tau * tau)).exp()).sum();
        let f_brute = a / (errors.len() as f64 * tau * (2.0 * std::f64::consts::PI).sqrt());
        worst_acc = worst_acc.max((zedm.a_n - a).abs()).max((f0 - f_brute).abs());
    }
    verdict(
        2,
        "recursions vs brute force",
        worst_density < 1e-9 && worst_acc < 1e-9,
        format!("max density deviation {worst_density:.2e}, max accumulator deviation {worst_acc:.2e} (limit 1e-9)"),
    );
}

#[test]
fn c03_inverse_covariance_consistency() {
    let mut worst = 0.0f64;
    for (p, seed) in [(2usize, 31u64), (5, 32)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inv = spd(&mut rng, p);
        let c = point(&mut rng, p);
        let mut rule = Rule::new(1, &c, 0.1, inv.clone(), Matrix::zeros(2 * p + 1, 1), Matrix::identity(2 * p + 1), 0.5, 1).unwrap();
        let mut cov = DMatrix::from_row_slice(p, p, inv.as_slice()).try_inverse().unwrap();
        for _ in 0..100 {
            let x = point(&mut rng, p);
            let alpha = 1.0 / (rule.n_pop as f64 + 1.0);
            let d = DVector::from_iterator(p, x.iter().zip(rule.center()).map(|(a, b)| a - b));
            cov = cov * (1.0 - alpha) + &d * d.transpose() * (alpha * (1.0 - alpha));
            update_premise(&mut rule, &x);
            let oracle = cov.clone().try_inverse().unwrap();
            let ours = DMatrix::from_row_slice(p, p, rule.inv_cov.as_slice());
            worst = worst.max((ours - &oracle).norm() / oracle.norm());
        }
    }
    verdict(3, "inverse covariance vs re-inversion", worst < 1e-6, format!("max relative error {worst:.2e} over 100 updates, p = 2 and 5 (limit 1e-6)"));
}

#[test]
fn c04_gradient_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-6;
    let loss = |rules: &[Rule<f64>], q: &[f64], x: &[f64], t: &[f64]| -> f64 {
        let y = evaluate(rules, q, x).unwrap().output;
        y.iter().zip(t).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum()
    };
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..100 {
        let p = rng.random_range(1..=3);
        let m = rng.random_range(1..=2);
        let count = rng.random_range(1..=5);
        let mut rules: Vec<_> = (0..count).map(|i| random_rule(&mut rng, i as u64, p, m)).collect();
        for r in &mut rules {
            r.lambda = r.lambda.clamp(1e-3, 1.0 - 1e-3);
        }
        let q: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..0.95)).collect();
        let x = point(&mut rng, p);
        let t: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let inf = evaluate(&rules, &q, &x).unwrap();
        let err: Vec<f64> = inf.output.iter().zip(&t).map(|(y, t)| y - t).collect();
        let g = gradients(&inf, &q, &err);
        let mut pairs = Vec::new();
        for o in 0..m {
            let (mut qp, mut qm) = (q.clone(), q.clone());
            qp[o] += h;
            qm[o] -= h;
            pairs.push((g.dq[o], (loss(&rules, &qp, &x, &t) - loss(&rules, &qm, &x, &t)) / (2.0 * h)));
        }
        for i in 0..count {
            let lam = rules[i].lambda;
            rules[i].lambda = lam + h;
            let up = loss(&rules, &q, &x, &t);
            rules[i].lambda = lam - h;
            let down = loss(&rules, &q, &x, &t);
            rules[i].lambda = lam;
            pairs.push((g.dlambda[i], (up - down) / (2.0 * h)));
        }
        for (a, fd) in pairs {
            let rel = (a - fd).abs() / (a.abs().max(fd.abs()).max(1e-4));
            worst = worst.max(rel);
            checked += 1;
        }
    }
    verdict(4, "gradient checks", worst < 1e-4, format!("max relative error {worst:.2e} over {checked} partials in 100 models (limit 1e-4)"));
}

#[test]
fn c05_type1_degeneracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_q, mut worst_ref) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let p = rng.random_range(1..=3);
        let count = rng.random_range(1..=5);
        let mut rules: Vec<_> = (0..count).map(|i| random_rule(&mut rng, i as u64, p, 1)).collect();
        for r in &mut rules {
            let c = r.center();
            r.c_lower = c.clone();
            r.c_upper = c;
            r.lambda = 1.0;
        }
        let x = point(&mut rng, p);
        let (mut num, mut den) = (0.0, 0.0);
        for r in &rules {
            let c = r.center();
            let w: f64 = (0..p).map(|j| (-(x[j] - c[j]).powi(2) / r.sigma[j].powi(2)).exp()).product();
            let mut feats = vec![1.0];
            for &xj in &x {
                feats.extend([xj, 2.0 * xj * xj - 1.0]);
            }
            num += w * feats.iter().enumerate().map(|(k, f)| f * r.weights[(k, 0)]).sum::<f64>();
            den += w;
        }
        let reference = num / den;
        let y0 = evaluate(&rules, &[0.0], &x).unwrap().output[0];
        for q in [0.25, 0.5, 0.75, 1.0] {
            let y = evaluate(&rules, &[q], &x).unwrap().output[0];
            worst_q = worst_q.max((y - y0).abs());
            worst_ref = worst_ref.max((y - reference).abs());
        }
    }
    verdict(
        5,
        "type-1 degeneracy",
        worst_q < 1e-12 && worst_ref < 1e-12,
        format!("max q-dependence {worst_q:.2e}, max deviation from type-1 TSK {worst_ref:.2e} (limit 1e-12)"),
    );
}

#[test]
fn c06_rule_discovery() {
    let s = generate(StreamKind::Clusters, 600, SEED, DriftSpec::default());
    let start = Instant::now();
    let (model, errs) = prequential(EngineConfig::default(), &s);
    let secs = start.elapsed().as_secs_f64();
    let ours = rmse(&errs);
    let base = prequential_rmse(&s.x, &s.t, BASELINE_WINDOW);
    let r = model.rule_count();
    verdict(
        6,
        "rule discovery",
        (3..=8).contains(&r) && ours < 1.5 * base && secs < 10.0,
        format!("R = {r} (want 3..=8), RMSE {ours:.4} vs 1.5 x baseline {:.4}, {secs:.2} s (limit 10 s)", 1.5 * base),
    );
}

#[test]
fn c07_active_learning_efficacy() {
    let s = generate(StreamKind::RedundantDuplicates, 2000, SEED, DriftSpec::default());
    let (active, e_active) = prequential(EngineConfig::default(), &s);
    let all_cfg = EngineConfig { active_learning: false, ..EngineConfig::default() };
    let (_, e_all) = prequential(all_cfg, &s);
    let frac = active.counters.accepted as f64 / active.counters.seen as f64;
    let (ra, rb) = (rmse(&e_active), rmse(&e_all));
    verdict(
        7,
        "active learning efficacy",
        frac < 0.6 && ra <= 1.1 * rb,
        format!("acceptance {:.1}% (limit 60%), RMSE {ra:.4} vs learn-everything {rb:.4} (limit +10%)", 100.0 * frac),
    );
}

#[test]
fn c08_cyclic_recall() {
    let n = 900;
    let s = generate(StreamKind::CyclicAba, n, SEED, DriftSpec::default());
    let (with, e_with) = prequential(EngineConfig::default(), &s);
    let (without, e_without) = prequential(EngineConfig { recall: false, ..EngineConfig::default() }, &s);
    let tail = 2 * n / 3;
    let (rw, rwo) = (rmse(&e_with[tail..]), rmse(&e_without[tail..]));
    let (gw, gwo) = (with.counters.grown, without.counters.grown);
    verdict(
        8,
        "cyclic recall",
        gw <= gwo && rw <= rwo,
        format!(
            "rules created {gw} with recall vs {gwo} without ({} recalls), final-third RMSE {rw:.4} vs {rwo:.4}",
            with.counters.recalled
        ),
    );
}

#[test]
fn c09_fwgrls_convergence() {
    let cfg = EngineConfig {
        decay: 0.0,
        scale_inputs: false,
        active_learning: false,
        alpha_sig: 1e-12,
        default_radius: 10.0,
        ..EngineConfig::default()
    };
    let mut model = Model::new(cfg, 1, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let (mut rows, mut ys) = (Vec::new(), Vec::new());
    for _ in 0..200 {
        let x: f64 = rng.random_range(-1.0..1.0);
        let y = 2.0 * x + noise.sample(&mut rng);
        model.process_sample(&[x], &[y]).unwrap();
        rows.extend([1.0, x, 2.0 * x * x - 1.0]);
        ys.push(y);
    }
    let a = DMatrix::from_row_slice(ys.len(), 3, &rows);
    let batch = (a.transpose() * &a).try_inverse().unwrap() * a.transpose() * DVector::from_vec(ys);
    let single = model.rule_count() == 1;
    let slope = model.rules[0].weights[(1, 0)];
    let gap = (slope - batch[1]).abs();
    verdict(
        9,
        "FWGRLS convergence",
        single && gap < 1e-5,
        format!("R = {}, slope {slope:.7} vs batch {:.7}, gap {gap:.2e} (limit 1e-5)", model.rule_count(), batch[1]),
    );
}

#[test]
fn c10_bounded_memory() {
    let cap = 8;
    let cfg = EngineConfig { rule_cap: cap, active_learning: false, ..EngineConfig::default() };
    let mut model = Model::new(cfg, 2, 1).unwrap();
    let s = generate(StreamKind::GradualDrift, 10_000, SEED, DriftSpec::default());
    let (mut peak, mut at_1e3) = (0, (0, 0));
    for (i, (x, t)) in s.x.iter().zip(&s.t).enumerate() {
        model.process_sample(x, t).unwrap();
        peak = peak.max(model.live_size_bytes());
        if i + 1 == 1000 {
            at_1e3 = (model.live_size_bytes(), model.rule_count());
        }
    }
    let at_1e4 = (model.live_size_bytes(), model.rule_count());
    let bound = model.size_bound_bytes(cap);
    let pass = peak <= bound && at_1e3.0 <= model.size_bound_bytes(at_1e3.1) && at_1e4.0 <= model.size_bound_bytes(at_1e4.1);
    verdict(
        10,
        "one-pass bounded memory",
        pass,
        format!(
            "{} B at 1e3 (R = {}), {} B at 1e4 (R = {}), peak {peak} B, bound at cap {bound} B",
            at_1e3.0, at_1e3.1, at_1e4.0, at_1e4.1
        ),
    );
}

fn cli_run(csv: &Path, out: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_evofuzz"))
        .args(["run", "--set", "seed=7", "--data"])
        .arg(csv)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
}

#[test]
fn c11_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("stream.csv");
    std::fs::write(&csv, generate(StreamKind::AbruptDrift, 800, SEED, DriftSpec::default()).to_csv()).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cli_run(&csv, &a);
    cli_run(&csv, &b);
    let files = ["model.snap", "metrics.jsonl", "summary.json", "plots/error.svg", "plots/rules.svg", "plots/acceptance.svg"];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap())
        .collect();
    verdict(11, "determinism", differing.is_empty(), format!("{} artefacts compared, differing: {differing:?}", files.len()));
}
