//! Continuous wavelet transform with analytic Morse and Morlet mother
//! wavelets, power scalograms, normalized 2-D cross-correlation and the
//! cohort statistic used to pick a mother wavelet.
//!
//! Scales are measured in samples. A wavelet whose spectrum peaks at `w_p`
//! rad/sample has pseudo-frequency `w_p * fs / (2 pi a)` Hz at scale `a`.
//! Coefficients follow `S(a, b) = a^{-1/2} sum_n x_n conj(psi((n - b) / a))`,
//! computed in the frequency domain as `sqrt(a) * IFFT(X(w) psi_hat(a w))`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::fft_pow2;
use crate::resample::UniformSeries;
use crate::series::VariableId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MotherWavelet {
    /// Generalized Morse wavelet, `psi_hat(w) ~ w^beta exp(-w^gamma)` for `w > 0`.
    Morse { gamma: f64, beta: f64 },
    /// Gaussian window around `center` rad/sample.
    Morlet { center: f64 },
}

impl MotherWavelet {
    pub const fn default_morse() -> Self {
        MotherWavelet::Morse { gamma: 3.0, beta: 20.0 }
    }

    pub const fn default_morlet() -> Self {
        MotherWavelet::Morlet { center: 6.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MotherWavelet::Morse { .. } => "morse",
            MotherWavelet::Morlet { .. } => "morlet",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MotherWavelet::Morse { gamma, beta } => gamma > 0.0 && beta > 0.0 && gamma.is_finite() && beta.is_finite(),
            MotherWavelet::Morlet { center } => center > 0.0 && center.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameters(alloc::format!("{self:?}")))
        }
    }

    /// Angular frequency where the spectrum peaks.
    pub fn peak_omega(&self) -> f64 {
        match *self {
            MotherWavelet::Morse { gamma, beta } => libm::pow(beta / gamma, 1.0 / gamma),
            MotherWavelet::Morlet { center } => center,
        }
    }

    /// Peak-normalized spectrum value at `omega`.
    pub fn spectrum_at(&self, omega: f64) -> f64 {
        match *self {
            MotherWavelet::Morse { gamma, beta } => {
                if omega <= 0.0 {
                    return 0.0;
                }
                let wp = self.peak_omega();
                // exp(beta ln(w/wp) - (w^gamma - wp^gamma)) keeps large beta finite
                libm::exp(beta * libm::log(omega / wp) - (libm::pow(omega, gamma) - libm::pow(wp, gamma)))
            }
            MotherWavelet::Morlet { center } => {
                let d = omega - center;
                libm::exp(-0.5 * d * d)
            }
        }
    }
}

/// Frequency-domain window values at `omegas`.
pub fn wavelet_spectrum(w: &MotherWavelet, omegas: &[f64]) -> Result<Vec<f64>> {
    w.validate()?;
    if omegas.iter().any(|o| !o.is_finite()) {
        return Err(Error::InvalidParameters("non-finite frequency".into()));
    }
    Ok(omegas.iter().map(|&o| w.spectrum_at(o)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CwtConfig {
    pub voices_per_octave: usize,
    /// Lowest pseudo-frequency is `min_cycles / record duration`.
    pub min_cycles: f64,
}

impl Default for CwtConfig {
    fn default() -> Self {
        Self {
            voices_per_octave: 12,
            min_cycles: 4.0,
        }
    }
}

/// Complex coefficients, row-major `n_scales x n_times`. Row 0 is the
/// smallest scale (highest pseudo-frequency).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalogram {
    pub n_scales: usize,
    pub n_times: usize,
    pub coefficients: Vec<Complex64>,
    pub scales: Vec<f64>,
    pub pseudo_frequencies: Vec<f64>,
    pub t0: f64,
    pub fs_source: f64,
}

impl Scalogram {
    pub fn row(&self, scale_index: usize) -> &[Complex64] {
        &self.coefficients[scale_index * self.n_times..(scale_index + 1) * self.n_times]
    }

    pub fn time_axis(&self) -> Vec<f64> {
        (0..self.n_times).map(|n| self.t0 + n as f64 / self.fs_source).collect()
    }
}

/// Geometric scale grid from the Nyquist frequency down to
/// `min_cycles / duration`, in samples.
pub fn scale_grid(w: &MotherWavelet, n_samples: usize, fs: f64, config: &CwtConfig) -> Vec<f64> {
    let f_max = fs / 2.0;
    let f_min = config.min_cycles * fs / n_samples as f64;
    let a_min = w.peak_omega() / PI;
    let voices = config.voices_per_octave.max(1) as f64;
    let n = if f_min < f_max {
        libm::floor(voices * libm::log2(f_max / f_min) + 1e-9) as usize + 1
    } else {
        1
    };
    (0..n).map(|j| a_min * libm::exp2(j as f64 / voices)).collect()
}

pub fn pseudo_frequency(w: &MotherWavelet, scale: f64, fs: f64) -> f64 {
    w.peak_omega() * fs / (2.0 * PI * scale)
}

pub fn cwt_transform(x: &UniformSeries, w: &MotherWavelet, config: &CwtConfig) -> Result<Scalogram> {
    w.validate()?;
    let n = x.len();
    if n < 8 {
        return Err(Error::SeriesTooShort { need: 8, got: n });
    }
    if !(x.fs > 0.0) {
        return Err(Error::InvalidParameters(alloc::format!("fs = {}", x.fs)));
    }
    let scales = scale_grid(w, n, x.fs, config);
    let m = (2 * n).next_power_of_two();
    let mut spectrum = vec![Complex64::new(0.0, 0.0); m];
    for (s, &v) in spectrum.iter_mut().zip(&x.values) {
        *s = Complex64::new(v, 0.0);
    }
    fft_pow2(&mut spectrum, false);
    let omegas: Vec<f64> = (0..m)
        .map(|k| {
            let k = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
            2.0 * PI * k / m as f64
        })
        .collect();
    let mut coefficients = Vec::with_capacity(scales.len() * n);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for &a in &scales {
        let gain = libm::sqrt(a) / m as f64;
        for ((b, &xk), &om) in buf.iter_mut().zip(&spectrum).zip(&omegas) {
            *b = xk * (w.spectrum_at(a * om) * gain);
        }
        fft_pow2(&mut buf, true);
        coefficients.extend_from_slice(&buf[..n]);
    }
    let pseudo_frequencies = scales.iter().map(|&a| pseudo_frequency(w, a, x.fs)).collect();
    Ok(Scalogram {
        n_scales: scales.len(),
        n_times: n,
        coefficients,
        scales,
        pseudo_frequencies,
        t0: x.t0,
        fs_source: x.fs,
    })
}

/// Squared-magnitude map, row-major `rows x cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdMap {
    pub rows: usize,
    pub cols: usize,
    pub power: Vec<f64>,
}

impl PsdMap {
    pub fn new(rows: usize, cols: usize, power: Vec<f64>) -> Result<Self> {
        if power.len() != rows * cols {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} values for a {rows}x{cols} map",
                power.len()
            )));
        }
        if power.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameters("power must be finite and non-negative".into()));
        }
        Ok(Self { rows, cols, power })
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.power[r * self.cols + c]
    }

    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Mean power of each row.
    pub fn row_means(&self) -> Vec<f64> {
        self.power
            .chunks(self.cols.max(1))
            .map(|r| r.iter().sum::<f64>() / self.cols as f64)
            .collect()
    }

    /// Averages blocks of columns so the map has at most `max_cols` columns.
    pub fn decimate_time(&self, max_cols: usize) -> PsdMap {
        if max_cols == 0 || self.cols <= max_cols {
            return self.clone();
        }
        let mut power = Vec::with_capacity(self.rows * max_cols);
        for r in 0..self.rows {
            let row = &self.power[r * self.cols..(r + 1) * self.cols];
            for c in 0..max_cols {
                let lo = c * self.cols / max_cols;
                let hi = ((c + 1) * self.cols / max_cols).max(lo + 1);
                power.push(row[lo..hi].iter().sum::<f64>() / (hi - lo) as f64);
            }
        }
        PsdMap {
            rows: self.rows,
            cols: max_cols,
            power,
        }
    }
}

pub fn psd_map(s: &Scalogram) -> PsdMap {
    PsdMap {
        rows: s.n_scales,
        cols: s.n_times,
        power: s.coefficients.iter().map(|c| c.norm_sqr()).collect(),
    }
}

/// Pseudo-frequency of the scale row with the largest mean power.
pub fn ridge_frequency(s: &Scalogram) -> f64 {
    let psd = psd_map(s);
    let means = psd.row_means();
    let mut best = 0;
    for (i, &m) in means.iter().enumerate() {
        if m > means[best] {
            best = i;
        }
    }
    s.pseudo_frequencies[best]
}

/// Normalized cross-correlation over all shifts, `(2H-1) x (2W-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XcorrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl XcorrMatrix {
    /// Value at shift `(dy, dx)`, each in `-(H-1)..=(H-1)` resp. `-(W-1)..=(W-1)`.
    pub fn at_shift(&self, dy: isize, dx: isize) -> f64 {
        let h = (self.rows as isize + 1) / 2;
        let w = (self.cols as isize + 1) / 2;
        self.values[((dy + h - 1) * self.cols as isize + (dx + w - 1)) as usize]
    }
}

fn is_constant(p: &PsdMap) -> bool {
    p.power.iter().all(|&v| v == p.power[0])
}

/// At shift `(dy, dx)` correlates `a[i][j]` with `b[i - dy][j - dx]` over the
/// overlap, subtracting each region's mean and dividing by the product of the
/// centered norms. Overlaps where either side is flat give 0.
pub fn xcorr2_norm(a: &PsdMap, b: &PsdMap) -> Result<XcorrMatrix> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::ShapeMismatch(alloc::format!(
            "{}x{} vs {}x{}",
            a.rows,
            a.cols,
            b.rows,
            b.cols
        )));
    }
    if a.power.is_empty() {
        return Err(Error::EmptyMap);
    }
    if is_constant(a) || is_constant(b) {
        return Err(Error::DegenerateConstant);
    }
    let (h, w) = (a.rows as isize, a.cols as isize);
    let (out_r, out_c) = (2 * a.rows - 1, 2 * a.cols - 1);
    let mut values = Vec::with_capacity(out_r * out_c);
    for dy in -(h - 1)..h {
        let (i0, i1) = (dy.max(0), (h + dy).min(h));
        for dx in -(w - 1)..w {
            let (j0, j1) = (dx.max(0), (w + dx).min(w));
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in i0..i1 {
                let ra = &a.power[(i * w) as usize..((i + 1) * w) as usize];
                let rb = &b.power[((i - dy) * w) as usize..((i - dy + 1) * w) as usize];
                for j in j0..j1 {
                    let x = ra[j as usize];
                    let y = rb[(j - dx) as usize];
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            let n = ((i1 - i0) * (j1 - j0)) as f64;
            let va = saa - sa * sa / n;
            let vb = sbb - sb * sb / n;
            let v = if va <= 1e-12 * saa || vb <= 1e-12 * sbb {
                0.0
            } else {
                ((sab - sa * sb / n) / libm::sqrt(va * vb)).clamp(-1.0, 1.0)
            };
            values.push(v);
        }
    }
    Ok(XcorrMatrix {
        rows: out_r,
        cols: out_c,
        values,
    })
}

/// PSD maps of one variable split by outcome.
#[derive(Debug, Clone)]
pub struct VariablePsds {
    pub variable: VariableId,
    pub success: Vec<PsdMap>,
    pub failure: Vec<PsdMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletStat {
    pub variable: VariableId,
    pub wavelet: MotherWavelet,
    pub mean: f64,
    pub variance: f64,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletSelection {
    pub table: Vec<WaveletStat>,
    pub chosen: MotherWavelet,
    /// Mean over variables of |pooled mean|, per candidate.
    pub score: Vec<(MotherWavelet, f64, f64)>,
}

/// Pooled mean and sample variance of every cross-correlation entry over all
/// (success, failure) pairs.
pub fn pooled_xcorr_stats(success: &[PsdMap], failure: &[PsdMap]) -> Result<(f64, f64, usize)> {
    let (mut sum, mut sum_sq, mut count) = (0.0, 0.0, 0usize);
    let mut pairs = 0;
    // sums are shifted by the first zero-shift value
    let mut shift = None;
    for s in success {
        for f in failure {
            let m = xcorr2_norm(s, f)?;
            let k = *shift.get_or_insert(m.values[m.values.len() / 2]);
            for v in &m.values {
                let d = v - k;
                sum += d;
                sum_sq += d * d;
            }
            count += m.values.len();
            pairs += 1;
        }
    }
    let k = shift.unwrap_or(0.0);
    let n = count as f64;
    let mean = k + sum / n;
    let variance = if count > 1 {
        (sum_sq - sum * sum / n) / (n - 1.0)
    } else {
        0.0
    };
    Ok((mean, variance.max(0.0), pairs))
}

/// Picks the candidate whose success-vs-failure cross-correlations are
/// closest to zero on average over variables, breaking ties by variance and
/// then by candidate order. `cohorts[i]` holds the maps computed with
/// `candidates[i]`.
pub fn select_wavelet(candidates: &[MotherWavelet], cohorts: &[Vec<VariablePsds>]) -> Result<WaveletSelection> {
    if candidates.is_empty() || candidates.len() != cohorts.len() {
        return Err(Error::InvalidParameters("one cohort per candidate wavelet".into()));
    }
    let mut table = Vec::new();
    let mut score = Vec::new();
    for (&wavelet, cohort) in candidates.iter().zip(cohorts) {
        if cohort.is_empty() {
            return Err(Error::EmptyCohort("all variables".into()));
        }
        let (mut abs_mean, mut var) = (0.0, 0.0);
        for v in cohort {
            if v.success.is_empty() || v.failure.is_empty() {
                return Err(Error::EmptyCohort(alloc::format!("{}", v.variable)));
            }
            let (mean, variance, n_pairs) = pooled_xcorr_stats(&v.success, &v.failure)?;
            abs_mean += libm::fabs(mean);
            var += variance;
            table.push(WaveletStat {
                variable: v.variable,
                wavelet,
                mean,
                variance,
                n_pairs,
            });
        }
        let k = cohort.len() as f64;
        score.push((wavelet, abs_mean / k, var / k));
    }
    let mut best = 0;
    for i in 1..score.len() {
        let (_, m, v) = score[i];
        let (_, bm, bv) = score[best];
        if m < bm || (m == bm && v < bv) {
            best = i;
        }
    }
    Ok(WaveletSelection {
        table,
        chosen: score[best].0,
        score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn sinusoid(freq: f64, fs: f64, seconds: f64) -> UniformSeries {
        let n = (seconds * fs) as usize;
        UniformSeries {
            variable: VariableId::Rr,
            patient_id: "p".into(),
            fs,
            t0: 0.0,
            values: (0..n).map(|i| libm::sin(2.0 * PI * freq * i as f64 / fs)).collect(),
        }
    }

    #[test]
    fn morse_peak_matches_formula() {
        let w = MotherWavelet::default_morse();
        let grid: Vec<f64> = (1..40_000).map(|i| i as f64 * 1e-4).collect();
        let vals = wavelet_spectrum(&w, &grid).unwrap();
        let (i, _) = vals.iter().enumerate().fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        let analytic = libm::pow(20.0 / 3.0, 1.0 / 3.0);
        assert!((analytic - 1.8821).abs() < 1e-4);
        assert!((grid[i] - analytic).abs() / analytic < 1e-3);
        assert!((vals[i] - 1.0).abs() < 1e-6);
        assert_eq!(w.spectrum_at(0.0), 0.0);
        assert_eq!(w.spectrum_at(-1.0), 0.0);
    }

    #[test]
    fn morlet_peak_at_center() {
        let w = MotherWavelet::default_morlet();
        let grid: Vec<f64> = (0..1200).map(|i| i as f64 * 0.01).collect();
        let vals = wavelet_spectrum(&w, &grid).unwrap();
        let (i, _) = vals.iter().enumerate().fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        assert!((grid[i] - 6.0).abs() <= 0.01);
    }

    #[test]
    fn invalid_wavelets_rejected() {
        assert!(wavelet_spectrum(&MotherWavelet::Morse { gamma: 0.0, beta: 2.0 }, &[1.0]).is_err());
        assert!(wavelet_spectrum(&MotherWavelet::Morlet { center: -1.0 }, &[1.0]).is_err());
    }

    #[test]
    fn zero_signal_and_linearity() {
        let w = MotherWavelet::default_morlet();
        let mut zero = sinusoid(0.5, 8.0, 20.0);
        zero.values.iter_mut().for_each(|v| *v = 0.0);
        let s = cwt_transform(&zero, &w, &CwtConfig::default()).unwrap();
        assert!(s.coefficients.iter().all(|c| c.norm() == 0.0));

        let x = sinusoid(0.7, 8.0, 20.0);
        let mut x3 = x.clone();
        x3.values.iter_mut().for_each(|v| *v *= 3.0);
        let a = cwt_transform(&x, &w, &CwtConfig::default()).unwrap();
        let b = cwt_transform(&x3, &w, &CwtConfig::default()).unwrap();
        for (p, q) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((p * 3.0 - q).norm() < 1e-9);
        }
    }

    #[test]
    fn too_short() {
        let x = sinusoid(0.5, 8.0, 0.5);
        assert_eq!(
            cwt_transform(&x, &MotherWavelet::default_morse(), &CwtConfig::default()).unwrap_err(),
            Error::SeriesTooShort { need: 8, got: 4 }
        );
    }

    #[test]
    fn pseudo_frequencies_decrease() {
        let x = sinusoid(0.5, 8.0, 60.0);
        let s = cwt_transform(&x, &MotherWavelet::default_morse(), &CwtConfig::default()).unwrap();
        assert!(s.pseudo_frequencies.windows(2).all(|w| w[1] < w[0]));
        assert!((s.pseudo_frequencies[0] - 4.0).abs() < 1e-12);
        assert!(*s.pseudo_frequencies.last().unwrap() >= 4.0 / 60.0 - 1e-12);
    }

    #[test]
    fn psd_examples() {
        let s = Scalogram {
            n_scales: 1,
            n_times: 2,
            coefficients: vec![Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)],
            scales: vec![1.0],
            pseudo_frequencies: vec![1.0],
            t0: 0.0,
            fs_source: 1.0,
        };
        let p = psd_map(&s);
        assert_eq!(p.power, vec![25.0, 0.0]);
    }

    #[test]
    fn decimation_averages_blocks() {
        let p = PsdMap::new(1, 6, vec![1.0, 3.0, 2.0, 4.0, 6.0, 8.0]).unwrap();
        assert_eq!(p.decimate_time(3).power, vec![2.0, 3.0, 7.0]);
        assert_eq!(p.decimate_time(10), p);
    }

    fn random_map(r: &mut SeededRng, h: usize, w: usize) -> PsdMap {
        PsdMap::new(h, w, (0..h * w).map(|_| r.uniform()).collect()).unwrap()
    }

    #[test]
    fn xcorr_self_and_negated() {
        let mut r = SeededRng::new(4);
        let a = random_map(&mut r, 6, 7);
        let m = xcorr2_norm(&a, &a).unwrap();
        assert!((m.at_shift(0, 0) - 1.0).abs() < 1e-9);
        // negation expressed as max - a keeps the map non-negative
        let neg = PsdMap::new(6, 7, a.power.iter().map(|v| 1.0 - v).collect()).unwrap();
        let m = xcorr2_norm(&a, &neg).unwrap();
        assert!((m.at_shift(0, 0) + 1.0).abs() < 1e-9);
        assert!(m.values.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn xcorr_errors() {
        let mut r = SeededRng::new(4);
        let a = random_map(&mut r, 3, 3);
        let b = random_map(&mut r, 3, 4);
        assert!(matches!(xcorr2_norm(&a, &b), Err(Error::ShapeMismatch(_))));
        let c = PsdMap::new(3, 3, vec![1.0; 9]).unwrap();
        assert_eq!(xcorr2_norm(&a, &c), Err(Error::DegenerateConstant));
    }

    #[test]
    fn xcorr_reflection_symmetry() {
        let mut r = SeededRng::new(10);
        let a = random_map(&mut r, 5, 4);
        let b = random_map(&mut r, 5, 4);
        let ab = xcorr2_norm(&a, &b).unwrap();
        let ba = xcorr2_norm(&b, &a).unwrap();
        for dy in -4isize..=4 {
            for dx in -3isize..=3 {
                assert!((ab.at_shift(dy, dx) - ba.at_shift(-dy, -dx)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn selection_identical_maps_still_deterministic() {
        let mut r = SeededRng::new(12);
        let a = random_map(&mut r, 4, 4);
        let cohort = vec![VariablePsds {
            variable: VariableId::FVt,
            success: vec![a.clone()],
            failure: vec![a.clone()],
        }];
        let cands = [MotherWavelet::default_morse(), MotherWavelet::default_morlet()];
        let sel = select_wavelet(&cands, &[cohort.clone(), cohort]).unwrap();
        assert_eq!(sel.chosen, cands[0]);
        let xc = xcorr2_norm(&a, &a).unwrap();
        assert!(xc.values.iter().any(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn selection_rejects_empty_class() {
        let mut r = SeededRng::new(12);
        let cohort = vec![VariablePsds {
            variable: VariableId::Rr,
            success: vec![random_map(&mut r, 3, 3)],
            failure: vec![],
        }];
        assert!(matches!(
            select_wavelet(&[MotherWavelet::default_morse()], &[cohort]),
            Err(Error::EmptyCohort(_))
        ));
    }
}
