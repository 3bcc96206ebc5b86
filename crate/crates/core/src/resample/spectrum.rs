use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::IrregularSeries;

/// Spectrum evaluated at angular frequencies `omegas` (rad/s). Frequencies in
/// Hz are `omega / 2 pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub omegas: Vec<f64>,
    pub coefficients: Vec<Complex64>,
    pub magnitude: Vec<f64>,
}

impl Spectrum {
    pub fn from_coefficients(omegas: Vec<f64>, coefficients: Vec<Complex64>) -> Self {
        let magnitude = coefficients.iter().map(|c| c.norm()).collect();
        Self {
            omegas,
            coefficients,
            magnitude,
        }
    }

    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.omegas.iter().map(|w| w / (2.0 * PI)).collect()
    }
}

fn expi(theta: f64) -> Complex64 {
    Complex64::new(libm::cos(theta), libm::sin(theta))
}

/// `X(w_k) = sum_n x_n exp(-i w_k t_n)` for complex samples.
pub fn nudft_complex(t: &[f64], x: &[Complex64], omegas: &[f64]) -> Result<Vec<Complex64>> {
    if t.len() != x.len() {
        return Err(Error::LengthMismatch(t.len(), x.len()));
    }
    if t.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(omegas
        .iter()
        .map(|&w| t.iter().zip(x).map(|(&tn, &xn)| xn * expi(-w * tn)).sum())
        .collect())
}

/// NUDFT of a real irregular series, evaluated term by term.
pub fn nudft(series: &IrregularSeries, omegas: &[f64]) -> Result<Spectrum> {
    let x: Vec<Complex64> = series.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let coefficients = nudft_complex(series.timestamps(), &x, omegas)?;
    Ok(Spectrum::from_coefficients(omegas.to_vec(), coefficients))
}

/// Angular frequencies of DFT bins `0..=n/2` for `n` samples at `fs` Hz.
pub fn dft_bin_omegas(n: usize, fs: f64) -> Vec<f64> {
    (0..=n / 2).map(|k| 2.0 * PI * k as f64 * fs / n as f64).collect()
}

/// NUDFT at `w_k = k * d_omega` for `k = 0..n_bins`. Uses a per-sample phasor
/// recurrence, re-anchored every 64 bins with an exact exponential.
pub fn nudft_uniform_bins(t: &[f64], x: &[f64], d_omega: f64, n_bins: usize) -> Result<Vec<Complex64>> {
    const REANCHOR: usize = 64;
    if t.len() != x.len() {
        return Err(Error::LengthMismatch(t.len(), x.len()));
    }
    if t.is_empty() {
        return Err(Error::EmptySeries);
    }
    let step: Vec<Complex64> = t.iter().map(|&tn| expi(-d_omega * tn)).collect();
    let mut term: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut out = Vec::with_capacity(n_bins);
    for k in 0..n_bins {
        if k > 0 && k % REANCHOR == 0 {
            let w = k as f64 * d_omega;
            for ((tm, &tn), &xn) in term.iter_mut().zip(t).zip(x) {
                *tm = expi(-w * tn) * xn;
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for tm in &term {
            acc += tm;
        }
        out.push(acc);
        for (tm, s) in term.iter_mut().zip(&step) {
            *tm *= s;
        }
    }
    Ok(out)
}

/// Pearson correlation of two magnitude sequences. A constant argument
/// against a varying one gives 0; two constants are an error.
pub fn spectrum_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::InvalidParameters(alloc::format!(
            "correlation needs at least 2 points, got {}",
            a.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 && sbb == 0.0 {
        return Err(Error::DegenerateConstant);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok((sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}
