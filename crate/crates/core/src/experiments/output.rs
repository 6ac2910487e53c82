use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{CellStatus, ExperimentResult, SuccessCurve, SweepConfig, SweepReport};
use crate::error::{Error, Result};

pub const SUCCESS_HEADER: [&str; 10] = [
    "cell_id",
    "m",
    "p",
    "q",
    "noise",
    "length",
    "mean_success",
    "band_low",
    "band_high",
    "sample_count",
];
pub const CUTOFF_HEADER: [&str; 4] = ["cell_id", "threshold", "required_length", "achieved_rate"];

#[derive(Serialize)]
struct SuccessRow {
    cell_id: usize,
    m: usize,
    p: f64,
    q: f64,
    noise: f64,
    length: usize,
    mean_success: f64,
    band_low: f64,
    band_high: f64,
    sample_count: usize,
}

#[derive(Serialize)]
struct CutoffRow {
    cell_id: usize,
    threshold: f64,
    required_length: usize,
    achieved_rate: f64,
}

#[derive(Serialize)]
struct CellSummary<'a> {
    cell_id: usize,
    m: usize,
    p: f64,
    q: f64,
    noise: f64,
    #[serde(flatten)]
    status: &'a CellStatus,
    sample_count: usize,
    replacements: usize,
    mean_completion_time: Option<f64>,
    mean_state_count: Option<f64>,
    max_state_count: usize,
    triangular_samples: usize,
    undecodable_runs: usize,
    max_rate: Option<f64>,
    path_accuracy: &'a [f64],
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a SweepConfig,
    cells: Vec<CellSummary<'a>>,
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv { context: path.display().to_string(), source }
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_error(path))?;
    for row in rows {
        writer.serialize(row).map_err(csv_error(path))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn write_header_only(path: &Path, header: &[&str]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_error(path))?;
    writer.write_record(header).map_err(csv_error(path))?;
    writer.flush().map_err(|e| Error::io(path, e))
}

fn write_curve(path: &Path, r: &ExperimentResult, curve: Option<&SuccessCurve>) -> Result<()> {
    let Some(curve) = curve else {
        return write_header_only(path, &SUCCESS_HEADER);
    };
    let rows = (0..curve.lengths.len()).map(|k| SuccessRow {
        cell_id: r.cell_id,
        m: r.cell.m,
        p: r.cell.p,
        q: r.cell.q,
        noise: r.noise,
        length: curve.lengths[k],
        mean_success: curve.mean[k],
        band_low: curve.band_low[k],
        band_high: curve.band_high[k],
        sample_count: curve.sample_count,
    });
    write_rows(path, rows)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| Error::Json { context: path.display().to_string(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Writes one success CSV per cell, `cutoffs.csv`, `summary.json` and
/// `timing.json` into `dir`. Everything except `timing.json` is a pure
/// function of the configuration.
pub fn write_outputs(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for r in &report.results {
        let path = dir.join(format!("success_cell_{:03}.csv", r.cell_id));
        write_curve(&path, r, r.curve.as_ref())?;
        written.push(path);
        if let Some(standard) = &r.standard_curve {
            let path = dir.join(format!("success_cell_{:03}_sqrt_s.csv", r.cell_id));
            write_curve(&path, r, Some(standard))?;
            written.push(path);
        }
    }

    let path = dir.join("cutoffs.csv");
    let rows: Vec<CutoffRow> = report
        .results
        .iter()
        .filter_map(|r| r.cutoffs.as_ref().map(|c| (r.cell_id, c)))
        .flat_map(|(cell_id, c)| {
            (0..c.thresholds.len()).map(move |k| CutoffRow {
                cell_id,
                threshold: c.thresholds[k],
                required_length: c.required_lengths[k],
                achieved_rate: c.achieved_rates[k],
            })
        })
        .collect();
    if rows.is_empty() {
        write_header_only(&path, &CUTOFF_HEADER)?;
    } else {
        write_rows(&path, rows)?;
    }
    written.push(path);

    let summary = Summary {
        config: &report.config,
        cells: report
            .results
            .iter()
            .map(|r| CellSummary {
                cell_id: r.cell_id,
                m: r.cell.m,
                p: r.cell.p,
                q: r.cell.q,
                noise: r.noise,
                status: &r.status,
                sample_count: r.samples.len(),
                replacements: r.replacements,
                mean_completion_time: finite(r.mean_completion_time),
                mean_state_count: finite(r.mean_state_count),
                max_state_count: r.max_state_count,
                triangular_samples: r.triangular_samples,
                undecodable_runs: r.undecodable_runs,
                max_rate: r.cutoffs.as_ref().map(|c| c.max_rate),
                path_accuracy: &r.path_accuracy,
            })
            .collect(),
    };
    let path = dir.join("summary.json");
    write_json(&path, &summary)?;
    written.push(path);

    let path = dir.join("timing.json");
    write_json(&path, &report.timings)?;
    written.push(path);
    Ok(written)
}
