//! Series CSV files (`t_seconds,value`, one file per `<patient>__<variable>.csv`)
//! and the cohort manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use weanscope_core::resample::UniformSeries;
use weanscope_core::series::{ClassLabel, IrregularSeries, VariableId};
use weanscope_core::synth::CohortSpec;

use crate::error::{PipelineError, Result};

pub const MANIFEST: &str = "manifest.json";

pub fn series_file_name(patient_id: &str, variable: VariableId) -> String {
    format!("{patient_id}__{}.csv", variable.as_str())
}

/// Splits `<patient>__<variable>.csv`.
pub fn parse_series_file_name(name: &str) -> Option<(String, VariableId)> {
    let stem = name.strip_suffix(".csv")?;
    let (pid, var) = stem.rsplit_once("__")?;
    if pid.is_empty() {
        return None;
    }
    Some((pid.to_string(), var.parse().ok()?))
}

fn write_pairs(path: &Path, t: impl Iterator<Item = f64>, v: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| PipelineError::format(path, e);
    w.write_record(["t_seconds", "value"]).map_err(err)?;
    for (t, y) in t.zip(v) {
        w.write_record([t.to_string(), y.to_string()]).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| PipelineError::format(path, e))?;
    super::write_bytes(path, &bytes)
}

pub fn write_series(path: &Path, s: &IrregularSeries) -> Result<()> {
    write_pairs(path, s.timestamps().iter().copied(), s.values())
}

pub fn write_uniform(path: &Path, s: &UniformSeries) -> Result<()> {
    write_pairs(path, (0..s.values.len()).map(|n| s.t0 + n as f64 / s.fs), &s.values)
}

pub fn read_series(
    path: &Path,
    variable: VariableId,
    patient_id: &str,
    label: Option<ClassLabel>,
) -> Result<IrregularSeries> {
    let bytes = super::read_bytes(path)?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let headers = r.headers().map_err(|e| PipelineError::format(path, e))?.clone();
    if headers.len() != 2 || &headers[0] != "t_seconds" || &headers[1] != "value" {
        return Err(PipelineError::format(path, "expected header t_seconds,value"));
    }
    let mut t = Vec::new();
    let mut v = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| PipelineError::format(path, e))?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|x| x.trim().parse::<f64>().ok())
                .ok_or_else(|| PipelineError::format(path, format!("row {}: bad number", i + 2)))
        };
        t.push(parse(0)?);
        v.push(parse(1)?);
    }
    IrregularSeries::new(variable, patient_id, label, t, v).map_err(|e| PipelineError::format(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientEntry {
    pub id: String,
    pub label: ClassLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub patients: Vec<PatientEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<CohortSpec>,
}

impl Manifest {
    pub fn label_of(&self, id: &str) -> Option<ClassLabel> {
        self.patients.iter().find(|p| p.id == id).map(|p| p.label)
    }
}

/// Every patient's eight series from a directory of series CSVs, keyed by
/// patient id; labels come from the manifest.
pub fn read_series_dir(dir: &Path, manifest: &Manifest) -> Result<BTreeMap<String, Vec<IrregularSeries>>> {
    let mut files: BTreeMap<String, BTreeMap<VariableId, PathBuf>> = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| PipelineError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some((pid, var)) = parse_series_file_name(&name) {
            files.entry(pid).or_default().insert(var, entry.path());
        }
    }
    let mut out = BTreeMap::new();
    for p in &manifest.patients {
        let vars = files
            .get(&p.id)
            .ok_or_else(|| PipelineError::MissingUpstreamArtifact(dir.join(series_file_name(&p.id, VariableId::FVt))))?;
        let mut series = Vec::with_capacity(8);
        for v in VariableId::ALL {
            let path = vars
                .get(&v)
                .ok_or_else(|| PipelineError::MissingUpstreamArtifact(dir.join(series_file_name(&p.id, v))))?;
            series.push(read_series(path, v, &p.id, Some(p.label))?);
        }
        out.insert(p.id.clone(), series);
    }
    Ok(out)
}
