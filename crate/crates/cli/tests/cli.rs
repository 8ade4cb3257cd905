use std::path::Path;
use std::process::Command;

use evofuzz::{EngineConfig, Model};
use evofuzz_cli::data::{read_csv, Columns};
use evofuzz_cli::metrics::{read_jsonl, Summary};
use evofuzz_cli::protocol::test_then_train;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evofuzz"))
}

fn ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

fn gen(dir: &Path, kind: &str, n: usize, name: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    ok(bin().args(["gen", "--kind", kind, "--n", &n.to_string(), "--seed", "9", "--out"]).arg(&path));
    path
}

#[test]
fn gen_is_reproducible_and_writes_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "cyclic-aba", 300, "a.csv");
    let b = gen(dir.path(), "cyclic-aba", 300, "b.csv");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let regimes = std::fs::read_to_string(dir.path().join("a.regimes.csv")).unwrap();
    assert_eq!(regimes.lines().count(), 301);
    assert!(regimes.lines().nth(150).unwrap().ends_with(",B"));
}

#[test]
fn run_writes_consistent_artefacts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = gen(dir.path(), "abrupt-drift", 400, "s.csv");
    let out = dir.path().join("run");
    let stdout = ok(bin().args(["run", "--data"]).arg(&csv).arg("--out").arg(&out));
    assert!(stdout.contains("rmse"));

    let records = read_jsonl(&out.join("metrics.jsonl")).unwrap();
    assert_eq!(records.len(), 400);
    assert!(records.windows(2).all(|w| w[0].index < w[1].index));
    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let errs: Vec<f64> = records.iter().filter_map(|r| r.sq_error).collect();
    let mse = errs.iter().sum::<f64>() / errs.len() as f64;
    assert!((summary.mse.unwrap() - mse).abs() < 1e-12);
    assert!(summary.samples_used <= 400);
    assert!(summary.acceptance_fraction.unwrap() <= 1.0);
    for f in ["timing.json", "config.toml", "model.snap", "plots/error.svg", "plots/rules.svg", "plots/acceptance.svg"] {
        assert!(out.join(f).exists(), "{f} missing");
    }

    let replot = dir.path().join("replot");
    ok(bin().args(["plot", "--metrics"]).arg(out.join("metrics.jsonl")).arg("--out").arg(&replot));
    for f in ["error.svg", "rules.svg", "acceptance.svg"] {
        assert_eq!(std::fs::read(out.join("plots").join(f)).unwrap(), std::fs::read(replot.join(f)).unwrap());
    }

    let dump = ok(bin().arg("inspect").arg(out.join("model.snap")));
    assert!(dump.contains("rule ") && dump.contains("seen 400"));
}

#[test]
fn config_file_and_overrides_reach_the_engine() {
    let dir = tempfile::tempdir().unwrap();
    let csv = gen(dir.path(), "clusters", 200, "s.csv");
    let cfg = dir.path().join("engine.toml");
    std::fs::write(&cfg, "rule_cap = 2\nactive_learning = false\n").unwrap();
    let out = dir.path().join("run");
    ok(bin()
        .args(["run", "--no-plots", "--set", "seed=5", "--data"])
        .arg(&csv)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out));
    let written = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(written.contains("rule_cap = 2") && written.contains("seed = 5"));
    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary.mean_rule_count <= 2.0);
    assert_eq!(summary.samples_used, 200);
}

#[test]
fn exit_codes_follow_the_failure_category() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(bin().args(["gen", "--kind", "spiral", "--out"]).arg(dir.path().join("x.csv"))), 2);
    let csv = gen(dir.path(), "clusters", 50, "s.csv");
    assert_eq!(code(bin().args(["run", "--set", "nope=1", "--data"]).arg(&csv).arg("--out").arg(&out)), 3);
    assert_eq!(code(bin().args(["run", "--data", "/no/such.csv", "--out"]).arg(&out)), 5);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,y\n1,2\n2,dog\n").unwrap();
    assert_eq!(code(bin().args(["run", "--data"]).arg(&bad).arg("--out").arg(&out)), 3);
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "x,y\n,1\n").unwrap();
    assert_eq!(code(bin().args(["run", "--data"]).arg(&empty).arg("--out").arg(&out)), 4);
    let snap = dir.path().join("junk.snap");
    std::fs::write(&snap, b"not a snapshot").unwrap();
    assert_eq!(code(bin().arg("inspect").arg(&snap)), 6);
}

#[test]
fn malformed_rows_are_counted() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let mut text = String::from("x,y\n");
    for i in 0..60 {
        let x = i as f64 / 60.0;
        text += &format!("{x},{}\n", 3.0 * x);
    }
    text += ",1\nabc,2\n1,2,3\n";
    std::fs::write(&csv, text).unwrap();
    let out = dir.path().join("run");
    ok(bin().args(["run", "--no-plots", "--data"]).arg(&csv).arg("--out").arg(&out));
    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.csv_rows_skipped, 3);
    assert_eq!(summary.samples, 60);
}

#[test]
fn prequential_predictions_precede_learning() {
    let text: String = std::iter::once("x1,x2,y\n".to_string())
        .chain((0..300).map(|i| {
            let (a, b) = (((i * 7) % 23) as f64 / 11.5 - 1.0, ((i * 5) % 17) as f64 / 8.5 - 1.0);
            format!("{a},{b},{}\n", a * b + 0.5 * a)
        }))
        .collect();
    let data = read_csv(text.as_bytes(), &Columns::default()).unwrap();
    let cfg = EngineConfig::default();
    let out = test_then_train(&cfg, &data).unwrap();
    let mut shadow = Model::new(cfg, 2, 1).unwrap();
    for (i, rec) in out.records.iter().enumerate() {
        let mut probe = shadow.clone();
        let poisoned = probe.process_sample(&data.x[i], &[data.t[i][0] + 1e3]).unwrap();
        assert_eq!(rec.prediction, poisoned.prediction, "sample {i}");
        let inside = !shadow.rules.is_empty()
            && data.x[i].iter().enumerate().all(|(j, v)| shadow.scaler.min[j] <= *v && *v <= shadow.scaler.max[j]);
        if inside {
            assert_eq!(rec.prediction, Some(shadow.predict(&data.x[i]).unwrap()), "sample {i}");
        }
        shadow.process_sample(&data.x[i], &data.t[i]).unwrap();
    }
}

#[test]
fn holdout_and_kfold_runs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = gen(dir.path(), "piecewise-linear", 300, "s.csv");
    for protocol in ["holdout:40:10", "kfold:3"] {
        let out = dir.path().join(protocol.replace(':', "_"));
        ok(bin().args(["run", "--no-plots", "--protocol", protocol, "--data"]).arg(&csv).arg("--out").arg(&out));
        let summary: Summary = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
        assert!(summary.rmse.unwrap().is_finite());
        if protocol.starts_with("kfold") {
            assert_eq!(summary.evaluated, 300);
            assert!(out.join("fold-3.snap").exists());
        } else {
            assert_eq!(summary.evaluated, 60);
        }
    }
}
