//! CSV tables written by the pipeline stages.

use std::path::Path;

use weanscope_core::cwt::{PsdMap, WaveletSelection};
use weanscope_core::eval::MetricSet;
use weanscope_core::hpo::{SearchSpace, TrialRecord};
use weanscope_core::resample::SweepResult;

use crate::error::{PipelineError, Result};

pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let err = |e: csv::Error| PipelineError::format(path, e);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| PipelineError::format(path, e))?;
    super::write_bytes(path, &bytes)
}

/// Header and rows as strings.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let bytes = super::read_bytes(path)?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let header = r
        .headers()
        .map_err(|e| PipelineError::format(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| PipelineError::format(path, e))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

pub fn write_sweep_table(path: &Path, r: &SweepResult) -> Result<()> {
    write_csv(
        path,
        &["method", "fs_hz", "mean_correlation"],
        r.table
            .iter()
            .map(|c| [c.method.as_str().to_string(), c.fs.to_string(), c.correlation.to_string()]),
    )
}

pub fn write_sweep_dispersion(path: &Path, r: &SweepResult) -> Result<()> {
    write_csv(
        path,
        &["method", "fs_hz", "min", "q1", "median", "q3", "max"],
        r.dispersion.iter().map(|(m, f)| {
            [
                m.as_str().to_string(),
                r.best_fs.to_string(),
                f.min.to_string(),
                f.q1.to_string(),
                f.median.to_string(),
                f.q3.to_string(),
                f.max.to_string(),
            ]
        }),
    )
}

pub fn write_wavelet_selection(path: &Path, sel: &WaveletSelection) -> Result<()> {
    write_csv(
        path,
        &["variable", "wavelet", "mean", "variance"],
        sel.table.iter().map(|s| {
            [
                s.variable.as_str().to_string(),
                s.wavelet.name().to_string(),
                s.mean.to_string(),
                s.variance.to_string(),
            ]
        }),
    )
}

/// Row-major matrix, one CSV row per scale.
pub fn write_matrix(path: &Path, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    let header: Vec<String> = (0..cols).map(|c| format!("c{c}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        path,
        &header,
        (0..rows).map(|r| values[r * cols..(r + 1) * cols].iter().map(|v| v.to_string()).collect::<Vec<_>>()),
    )
}

pub fn write_psd_csv(path: &Path, m: &PsdMap) -> Result<()> {
    write_matrix(path, m.rows, m.cols, &m.power)
}

/// Point as a JSON object keyed by dimension name; categorical values as labels.
pub fn point_json(space: &SearchSpace, point: &[f64]) -> serde_json::Value {
    use weanscope_core::hpo::Dimension;
    let mut map = serde_json::Map::new();
    for (d, &v) in space.dims.iter().zip(point) {
        let value = match d {
            Dimension::Integer { .. } => serde_json::json!(v as i64),
            Dimension::Categorical { options, .. } => serde_json::json!(options[v as usize]),
            _ => serde_json::json!(v),
        };
        map.insert(d.name().to_string(), value);
    }
    serde_json::Value::Object(map)
}

pub fn write_trial_log(path: &Path, space: &SearchSpace, trials: &[TrialRecord]) -> Result<()> {
    write_csv(
        path,
        &["trial", "config_json", "objective_tnr", "epochs", "seed", "seconds"],
        trials.iter().map(|t| {
            [
                t.trial.to_string(),
                point_json(space, &t.point).to_string(),
                t.objective.to_string(),
                t.epochs.to_string(),
                t.seed.to_string(),
                format!("{:.3}", t.seconds),
            ]
        }),
    )
}

pub fn metric_row(run_id: &str, m: &MetricSet) -> [String; 5] {
    [
        run_id.to_string(),
        m.accuracy.to_string(),
        m.recall.to_string(),
        m.precision.to_string(),
        m.f1.to_string(),
    ]
}

pub fn write_metrics(path: &Path, rows: &[(String, MetricSet)]) -> Result<()> {
    write_csv(
        path,
        &["run_id", "accuracy", "recall", "precision", "f1"],
        rows.iter().map(|(id, m)| metric_row(id, m)),
    )
}
