//! The work behind each subcommand, kept out of `main` so tests can drive it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use evofuzz::scalar::Real;
use evofuzz::{EngineConfig, Error as ModelError, Model, ModelF32, ModelState};

use crate::config::render_config;
use crate::data::{read_csv, Columns};
use crate::error::CliError;
use crate::gen::{generate, DriftSpec, StreamKind};
use crate::metrics::{read_jsonl, records_to_jsonl, to_json_pretty, write_file, Summary, Timing, METRICS_SCHEMA_VERSION};
use crate::plots::write_plots;
use crate::protocol::{run_protocol, Protocol};

pub struct RunArgs {
    pub data: PathBuf,
    pub config: EngineConfig,
    pub columns: Columns,
    pub protocol: Protocol,
    pub out: PathBuf,
    pub plots: bool,
}

/// Reads the CSV, runs the protocol and writes every artefact into `out`.
pub fn run(args: &RunArgs) -> Result<(Summary, Timing), CliError> {
    let file = std::fs::File::open(&args.data).map_err(|e| CliError::io(&args.data, e))?;
    let data = read_csv(std::io::BufReader::new(file), &args.columns)?;
    if data.skipped_rows > 0 {
        log::warn!("{} malformed or incomplete rows skipped", data.skipped_rows);
    }
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;

    let start = Instant::now();
    let output = run_protocol(&args.config, &data, args.protocol)?;
    let wall = start.elapsed().as_secs_f64();

    let summary = Summary::build(
        &args.protocol.to_string(),
        data.p(),
        data.m(),
        data.len(),
        data.skipped_rows,
        &output.records,
        &output.model_summaries(),
    );
    let metrics_path = args.out.join("metrics.jsonl");
    write_file(&metrics_path, records_to_jsonl(&output.records).as_bytes())?;
    write_file(&args.out.join("summary.json"), to_json_pretty(&summary).as_bytes())?;
    let processed: u64 = summary.models.iter().map(|m| m.seen).sum();
    let timing = Timing {
        schema: METRICS_SCHEMA_VERSION,
        wall_seconds: wall,
        samples_per_second: if wall > 0.0 { processed as f64 / wall } else { 0.0 },
    };
    write_file(&args.out.join("timing.json"), to_json_pretty(&timing).as_bytes())?;
    write_file(&args.out.join("config.toml"), render_config(&args.config).as_bytes())?;
    for (label, model) in &output.models {
        write_file(&args.out.join(format!("{label}.snap")), &model.snapshot())?;
    }
    if args.plots {
        write_plots(&read_jsonl(&metrics_path)?, &args.out.join("plots"))?;
    }
    Ok((summary, timing))
}

/// Human-readable summary printed after a run.
pub fn report(summary: &Summary, wall_seconds: Option<f64>) -> String {
    let mut s = String::new();
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"));
    writeln!(s, "protocol            {}", summary.protocol).unwrap();
    writeln!(s, "samples             {} ({} csv rows skipped)", summary.samples, summary.csv_rows_skipped).unwrap();
    writeln!(s, "evaluated           {}", summary.evaluated).unwrap();
    writeln!(s, "mse                 {}", opt(summary.mse)).unwrap();
    writeln!(s, "rmse                {}", opt(summary.rmse)).unwrap();
    writeln!(s, "rules               {:.1}", summary.mean_rule_count).unwrap();
    writeln!(
        s,
        "samples used        {} of {} ({})",
        summary.samples_used,
        summary.samples_learned_from,
        opt(summary.acceptance_fraction)
    )
    .unwrap();
    writeln!(s, "parameters          {:.0}", summary.mean_parameter_count).unwrap();
    if let Some(w) = wall_seconds {
        writeln!(s, "runtime             {w:.3} s").unwrap();
    }
    s
}

pub fn regimes_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map_or_else(|| "stream".into(), |s| s.to_string_lossy().into_owned());
    csv.with_file_name(format!("{stem}.regimes.csv"))
}

/// Writes the stream CSV and its regime side file; returns the side file path.
pub fn gen(kind: StreamKind, n: usize, seed: u64, drift: DriftSpec, out: &Path, regimes: Option<&Path>) -> Result<PathBuf, CliError> {
    if !(0.0..=1.0).contains(&drift.at) || !(drift.width >= 0.0) {
        return Err(CliError::Config("drift position must lie in [0, 1] and width must be non-negative".into()));
    }
    let stream = generate(kind, n, seed, drift);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    write_file(out, stream.to_csv().as_bytes())?;
    let side = regimes.map_or_else(|| regimes_path(out), Path::to_path_buf);
    write_file(&side, stream.regimes_csv().as_bytes())?;
    Ok(side)
}

fn fmt_vec<T: Real>(v: &[T]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{:.6}", x.as_f64())).collect();
    format!("[{}]", parts.join(", "))
}

/// Dumps a model's state and rule base.
pub fn describe<T: Real>(m: &ModelState<T>) -> String {
    let mut s = String::new();
    writeln!(s, "scalar width   {} bytes", T::WIDTH).unwrap();
    writeln!(s, "inputs         {}", m.p).unwrap();
    writeln!(s, "outputs        {}", m.m).unwrap();
    let c = &m.counters;
    writeln!(
        s,
        "samples        seen {} accepted {} skipped {}",
        c.seen, c.accepted, c.skipped
    )
    .unwrap();
    writeln!(s, "structure      grown {} pruned {} recalled {}", c.grown, c.pruned, c.recalled).unwrap();
    writeln!(s, "q              {}", fmt_vec(&m.q)).unwrap();
    writeln!(s, "delta1         {:.6}", m.gate.delta1.as_f64()).unwrap();
    writeln!(s, "learning rate  eta_q {:.3e} eta_lambda {:.3e}", m.zedm.eta_q.as_f64(), m.zedm.eta_lambda.as_f64()).unwrap();
    if m.scaler.enabled {
        writeln!(s, "input range    min {} max {}", fmt_vec(&m.scaler.min), fmt_vec(&m.scaler.max)).unwrap();
    }
    match &m.gmm {
        Some(g) => writeln!(s, "density        {} components, weights {}", g.n_components(), fmt_vec(&g.weights)).unwrap(),
        None => writeln!(s, "density        warming up ({} of {} samples)", m.warmup.len(), m.config.n_history).unwrap(),
    }
    writeln!(s, "archive        {} rules", m.archive.len()).unwrap();
    writeln!(s, "rules          {}", m.rules.len()).unwrap();
    for r in &m.rules {
        writeln!(s, "\nrule {}", r.id).unwrap();
        writeln!(s, "  lower centre {}", fmt_vec(&r.c_lower)).unwrap();
        writeln!(s, "  upper centre {}", fmt_vec(&r.c_upper)).unwrap();
        writeln!(s, "  radii        {}", fmt_vec(&r.sigma)).unwrap();
        writeln!(s, "  population   {}", r.n_pop).unwrap();
        writeln!(s, "  lambda       {:.6}", r.lambda.as_f64()).unwrap();
        writeln!(s, "  utility      {:.6}", r.util.utility().as_f64()).unwrap();
        for o in 0..m.m {
            let col: Vec<T> = (0..r.weights.rows()).map(|k| r.weights[(k, o)]).collect();
            writeln!(s, "  output {o}     {}", fmt_vec(&col)).unwrap();
        }
    }
    s
}

/// Restores a snapshot of either scalar width and describes it.
pub fn inspect(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    match Model::restore(&bytes) {
        Ok(m) => Ok(describe(&m)),
        Err(ModelError::ScalarWidth { .. }) => Ok(describe(&ModelF32::restore(&bytes)?)),
        Err(e) => Err(e.into()),
    }
}

/// Redraws the plots of a finished run from its metrics file.
pub fn plot(metrics: &Path, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    write_plots(&read_jsonl(metrics)?, out)
}
