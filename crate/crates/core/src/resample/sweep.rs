use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::interp::{grid_len, resample_uniform, Method};
use super::spectrum::{nudft_uniform_bins, spectrum_correlation};
use crate::error::{Error, Result};
use crate::fft::fft;
use crate::series::IrregularSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub f_lo: f64,
    pub f_hi: f64,
    pub f_step: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            f_lo: 0.1,
            f_hi: 3.0,
            f_step: 0.1,
        }
    }
}

/// Inclusive `f_lo..=f_hi` grid, rounded to 1e-9 Hz so that cells compare
/// equal across runs.
pub fn frequency_grid(f_lo: f64, f_hi: f64, f_step: f64) -> Result<Vec<f64>> {
    if !(f_lo > 0.0 && f_step > 0.0 && f_hi >= f_lo) {
        return Err(Error::InvalidParameters(alloc::format!(
            "frequency grid {f_lo}..{f_hi} step {f_step}"
        )));
    }
    let n = libm::round((f_hi - f_lo) / f_step) as usize + 1;
    Ok((0..n)
        .map(|i| libm::round((f_lo + i as f64 * f_step) * 1e9) / 1e9)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub method: Method,
    pub fs: f64,
    pub correlation: f64,
}

/// Min, lower quartile, median, upper quartile, max (linear-interpolated
/// quantiles).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = libm::floor(pos) as usize;
            let hi = (lo + 1).min(v.len() - 1);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

/// Correlation table over (fs, method) in fs-major order, its argmax, and the
/// spread of per-series correlations at the winning frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub table: Vec<SweepCell>,
    pub best_method: Method,
    pub best_fs: f64,
    pub best_correlation: f64,
    pub dispersion: Vec<(Method, FiveNumber)>,
    pub n_series: usize,
}

impl SweepResult {
    pub fn get(&self, method: Method, fs: f64) -> Option<f64> {
        self.table
            .iter()
            .find(|c| c.method == method && c.fs == fs)
            .map(|c| c.correlation)
    }
}

/// Correlation of the DFT magnitude of the `method`/`fs` resampling with the
/// NUDFT magnitude of `series` at the same bins. `nudft_mag` may be passed in
/// when several methods share one frequency.
pub fn cell_correlation(series: &IrregularSeries, method: Method, fs: f64, nudft_mag: Option<&[f64]>) -> Result<f64> {
    let uniform = resample_uniform(series, method, fs)?;
    let n = uniform.len();
    let n_bins = n / 2 + 1;
    let buf: Vec<Complex64> = uniform.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let dft_mag: Vec<f64> = fft(&buf)[..n_bins].iter().map(|c| c.norm()).collect();
    let owned;
    let reference = match nudft_mag {
        Some(m) => m,
        None => {
            owned = original_magnitude(series, fs)?;
            &owned
        }
    };
    if n_bins < 2 {
        return Ok(0.0);
    }
    match spectrum_correlation(&dft_mag, reference) {
        Ok(c) => Ok(c),
        Err(Error::DegenerateConstant) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// NUDFT magnitude of the irregular samples at the DFT bins of a `fs`
/// resampling.
pub fn original_magnitude(series: &IrregularSeries, fs: f64) -> Result<Vec<f64>> {
    let n = grid_len(series.span(), fs);
    let d_omega = 2.0 * PI * fs / n as f64;
    let coeffs = nudft_uniform_bins(series.timestamps(), series.values(), d_omega, n / 2 + 1)?;
    Ok(coeffs.iter().map(|c| c.norm()).collect())
}

/// Full (method, fs) sweep on one series.
pub fn sweep_select(series: &IrregularSeries, config: &SweepConfig) -> Result<SweepResult> {
    if series.len() < 4 {
        return Err(Error::TooFewKnots { need: 4, got: series.len() });
    }
    if config.methods.is_empty() {
        return Err(Error::InvalidParameters("no interpolation methods".into()));
    }
    let grid = frequency_grid(config.f_lo, config.f_hi, config.f_step)?;
    let mut table = Vec::with_capacity(grid.len() * config.methods.len());
    for &fs in &grid {
        let reference = original_magnitude(series, fs)?;
        for &method in &config.methods {
            let correlation = cell_correlation(series, method, fs, Some(&reference))?;
            table.push(SweepCell { method, fs, correlation });
        }
    }
    let per_series = [table];
    aggregate_sweeps(&per_series)
}

/// Averages per-series tables cell by cell. All tables must share one grid.
pub fn aggregate_sweeps(tables: &[Vec<SweepCell>]) -> Result<SweepResult> {
    let first = tables.first().ok_or(Error::Empty)?;
    if first.is_empty() {
        return Err(Error::Empty);
    }
    for t in tables {
        if t.len() != first.len() || t.iter().zip(first).any(|(a, b)| a.method != b.method || a.fs != b.fs) {
            return Err(Error::ShapeMismatch("sweep tables use different grids".into()));
        }
    }
    let n = tables.len() as f64;
    let mean: Vec<SweepCell> = (0..first.len())
        .map(|i| SweepCell {
            correlation: tables.iter().map(|t| t[i].correlation).sum::<f64>() / n,
            ..first[i]
        })
        .collect();
    // ties: lower fs first (table is fs-major), then method order
    let mut best = mean[0];
    for c in &mean[1..] {
        if c.correlation > best.correlation {
            best = *c;
        }
    }
    let mut methods: Vec<Method> = Vec::new();
    for c in first {
        if !methods.contains(&c.method) {
            methods.push(c.method);
        }
    }
    let dispersion = methods
        .iter()
        .filter_map(|&m| {
            let idx = first.iter().position(|c| c.method == m && c.fs == best.fs)?;
            let vals: Vec<f64> = tables.iter().map(|t| t[idx].correlation).collect();
            FiveNumber::of(&vals).map(|f| (m, f))
        })
        .collect();
    Ok(SweepResult {
        table: mean,
        best_method: best.method,
        best_fs: best.fs,
        best_correlation: best.correlation,
        dispersion,
        n_series: tables.len(),
    })
}
