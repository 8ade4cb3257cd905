//! SVG curves drawn from per-sample records.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::CliError;
use crate::metrics::SampleRecord;

/// Width of the trailing window for the acceptance-rate curve.
pub const ACCEPTANCE_WINDOW: usize = 50;

fn draw(path: &Path, title: &str, y_desc: &str, points: &[(f64, f64)]) -> Result<(), CliError> {
    let fail = |e: &dyn std::fmt::Display| CliError::Data(format!("drawing {}: {e}", path.display()));
    let (x_max, y_min, y_max) = points.iter().fold((1.0f64, f64::INFINITY, f64::NEG_INFINITY), |(xm, lo, hi), &(x, y)| {
        (xm.max(x), lo.min(y), hi.max(y))
    });
    let (y_min, y_max) = if y_min.is_finite() && y_max > y_min {
        (y_min, y_max)
    } else if y_min.is_finite() {
        (y_min - 0.5, y_min + 0.5)
    } else {
        (0.0, 1.0)
    };
    let root = SVGBackend::new(path, (800, 360)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| fail(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(60)
        .build_cartesian_2d(0f64..x_max, y_min..y_max)
        .map_err(|e| fail(&e))?;
    chart.configure_mesh().x_desc("sample").y_desc(y_desc).draw().map_err(|e| fail(&e))?;
    chart.draw_series(LineSeries::new(points.iter().copied(), &BLUE)).map_err(|e| fail(&e))?;
    root.present().map_err(|e| fail(&e))?;
    Ok(())
}

/// Running RMSE over the scored records, in record order.
pub fn error_curve(records: &[SampleRecord]) -> Vec<(f64, f64)> {
    let mut sum = 0.0;
    let mut n = 0usize;
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.scored())
        .map(|(i, r)| {
            sum += r.sq_error.unwrap_or(0.0);
            n += 1;
            (i as f64, (sum / n as f64).sqrt())
        })
        .collect()
}

pub fn rule_curve(records: &[SampleRecord]) -> Vec<(f64, f64)> {
    records.iter().enumerate().map(|(i, r)| (i as f64, r.rule_count as f64)).collect()
}

/// Fraction of accepted samples over the trailing window of learning records.
pub fn acceptance_curve(records: &[SampleRecord]) -> Vec<(f64, f64)> {
    let learning: Vec<(usize, bool)> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.phase != crate::metrics::Phase::Test)
        .map(|(i, r)| (i, r.accepted))
        .collect();
    let mut out = Vec::with_capacity(learning.len());
    let mut inside = 0usize;
    for (k, &(i, acc)) in learning.iter().enumerate() {
        inside += usize::from(acc);
        if k >= ACCEPTANCE_WINDOW {
            inside -= usize::from(learning[k - ACCEPTANCE_WINDOW].1);
        }
        let width = (k + 1).min(ACCEPTANCE_WINDOW);
        out.push((i as f64, inside as f64 / width as f64));
    }
    out
}

/// Writes `error.svg`, `rules.svg` and `acceptance.svg` into `dir`.
pub fn write_plots(records: &[SampleRecord], dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let jobs = [
        ("error.svg", "running RMSE", "rmse", error_curve(records)),
        ("rules.svg", "rule count", "rules", rule_curve(records)),
        ("acceptance.svg", "acceptance rate (trailing 50)", "fraction", acceptance_curve(records)),
    ];
    let mut paths = Vec::new();
    for (name, title, y, pts) in jobs {
        let path = dir.join(name);
        draw(&path, title, y, &pts)?;
        paths.push(path);
    }
    Ok(paths)
}
