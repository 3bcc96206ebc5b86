//! Synthetic cohorts shaped like the weaning database: eight irregular
//! series per patient with class-dependent spectral content, gaps and
//! outliers.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::series::{ClassLabel, IrregularSeries, VariableId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableProfile {
    /// Mean sampling interval in seconds.
    pub base_interval_s: f64,
    pub level: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassSignature {
    /// Oscillation frequency per variable, canonical order.
    pub ridge_hz: [f64; 8],
    pub amplitude: f64,
}

impl ClassSignature {
    pub fn uniform(ridge_hz: f64, amplitude: f64) -> Self {
        Self {
            ridge_hz: [ridge_hz; 8],
            amplitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n_success: usize,
    pub n_failure: usize,
    pub n_reintubated: usize,
    pub record_length_s: f64,
    /// Indexed by class: C0, C1, C2.
    pub classes: [ClassSignature; 3],
    pub variables: [VariableProfile; 8],
    /// Multiplicative interval jitter, intervals drawn from `base * (1 ± jitter)`.
    pub jitter: f64,
    /// Additive white noise relative to unit amplitude.
    pub noise: f64,
    pub gaps_per_series: usize,
    pub gap_length_s: (f64, f64),
    pub outlier_rate: f64,
    /// Outlier magnitude in standard deviations of the clean process.
    pub outlier_sigma: f64,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        let resp = |level, scale| VariableProfile {
            base_interval_s: 2.0,
            level,
            scale,
        };
        Self {
            n_success: 10,
            n_failure: 5,
            n_reintubated: 2,
            record_length_s: 1800.0,
            classes: [
                ClassSignature::uniform(0.05, 1.0),
                ClassSignature::uniform(0.12, 1.5),
                ClassSignature::uniform(0.12, 1.5),
            ],
            // canonical order: f_VT, VT_TI, T_Tot, TI_TTot, T_I, T_E, V_T, RR
            variables: [
                resp(60.0, 12.0),
                resp(0.45, 0.08),
                resp(3.2, 0.4),
                resp(0.38, 0.04),
                resp(1.2, 0.15),
                resp(2.0, 0.3),
                resp(0.45, 0.07),
                VariableProfile {
                    base_interval_s: 0.8,
                    level: 0.8,
                    scale: 0.05,
                },
            ],
            jitter: 0.3,
            noise: 0.3,
            gaps_per_series: 1,
            gap_length_s: (30.0, 60.0),
            outlier_rate: 0.002,
            outlier_sigma: 10.0,
            seed: 0,
        }
    }
}

impl CohortSpec {
    pub fn with_counts(n_success: usize, n_failure: usize, n_reintubated: usize) -> Self {
        Self {
            n_success,
            n_failure,
            n_reintubated,
            ..Self::default()
        }
    }

    pub fn n_patients(&self) -> usize {
        self.n_success + self.n_failure + self.n_reintubated
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(self.record_length_s > 0.0 && self.record_length_s.is_finite()) {
            return bad(format!("record length {}", self.record_length_s));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return bad(format!("jitter {} outside [0, 1)", self.jitter));
        }
        if !(0.0..1.0).contains(&self.outlier_rate) {
            return bad(format!("outlier rate {} outside [0, 1)", self.outlier_rate));
        }
        if !(self.noise >= 0.0) || !(self.outlier_sigma >= 0.0) {
            return bad("noise and outlier size must be non-negative".into());
        }
        let (g0, g1) = self.gap_length_s;
        if !(g0 > 0.0 && g1 >= g0) {
            return bad(format!("gap length range ({g0}, {g1})"));
        }
        let reserved = self.gaps_per_series as f64 * (g1 + 60.0);
        if reserved >= 0.5 * self.record_length_s {
            return bad("gaps take more than half the record".into());
        }
        for (v, p) in VariableId::ALL.iter().zip(&self.variables) {
            if !(p.base_interval_s > 0.0 && p.scale.is_finite() && p.level.is_finite()) {
                return bad(format!("profile for {v}"));
            }
            let nyquist = 0.5 / p.base_interval_s;
            for (k, c) in self.classes.iter().enumerate() {
                let f = c.ridge_hz[v.channel()];
                if !(f > 0.0 && f < nyquist) {
                    return bad(format!("class C{k} frequency {f} Hz for {v} outside (0, {nyquist})"));
                }
                if !(c.amplitude >= 0.0) {
                    return bad(format!("class C{k} amplitude"));
                }
            }
        }
        Ok(())
    }
}

/// What was injected into one series, for recovery checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    /// Indices into the emitted series.
    pub outlier_indices: Vec<usize>,
    /// `(start, end)` of each removed interval, seconds.
    pub gaps: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patient {
    pub id: String,
    pub label: ClassLabel,
    /// Canonical variable order.
    pub series: Vec<IrregularSeries>,
    pub injections: Vec<Injection>,
}

pub fn patient_labels(spec: &CohortSpec) -> Vec<ClassLabel> {
    let mut labels = Vec::with_capacity(spec.n_patients());
    labels.extend(core::iter::repeat_n(ClassLabel::C0, spec.n_success));
    labels.extend(core::iter::repeat_n(ClassLabel::C1, spec.n_failure));
    labels.extend(core::iter::repeat_n(ClassLabel::C2, spec.n_reintubated));
    labels
}

pub fn patient_id(index: usize) -> String {
    format!("p{index:03}")
}

pub fn generate_cohort(spec: &CohortSpec) -> Result<Vec<Patient>> {
    spec.validate()?;
    patient_labels(spec)
        .into_iter()
        .enumerate()
        .map(|(i, label)| generate_patient(spec, i, label))
        .collect()
}

/// One patient; depends only on `(spec, index, label)`.
pub fn generate_patient(spec: &CohortSpec, index: usize, label: ClassLabel) -> Result<Patient> {
    let id = patient_id(index);
    let patient_seed = crate::rng::mix(spec.seed, index as u64);
    let class = &spec.classes[match label {
        ClassLabel::C0 => 0,
        ClassLabel::C1 => 1,
        ClassLabel::C2 => 2,
    }];
    let mut series = Vec::with_capacity(8);
    let mut injections = Vec::with_capacity(8);
    for v in VariableId::ALL {
        let mut rng = SeededRng::derive(patient_seed, v.channel() as u64);
        let (s, inj) = generate_series(spec, class, v, &id, label, &mut rng)?;
        series.push(s);
        injections.push(inj);
    }
    Ok(Patient {
        id,
        label,
        series,
        injections,
    })
}

fn generate_series(
    spec: &CohortSpec,
    class: &ClassSignature,
    v: VariableId,
    id: &str,
    label: ClassLabel,
    rng: &mut SeededRng,
) -> Result<(IrregularSeries, Injection)> {
    let prof = spec.variables[v.channel()];
    let freq = class.ridge_hz[v.channel()];
    let phase = rng.uniform_range(0.0, 2.0 * PI);

    // removed intervals, placed in the first part of the record so one
    // long segment remains
    let mut gaps = Vec::with_capacity(spec.gaps_per_series);
    let mut cursor = 60.0;
    for _ in 0..spec.gaps_per_series {
        let start = cursor + rng.uniform_range(0.0, 0.1 * spec.record_length_s);
        let len = rng.uniform_range(spec.gap_length_s.0, spec.gap_length_s.1);
        gaps.push((start, start + len));
        cursor = start + len + 60.0;
    }

    let sigma = libm::sqrt(class.amplitude * class.amplitude / 2.0 + spec.noise * spec.noise) * prof.scale;
    let mut t = rng.uniform_range(0.0, prof.base_interval_s);
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    let mut outliers = Vec::new();
    while t < spec.record_length_s {
        let in_gap = gaps.iter().any(|&(a, b)| t > a && t < b);
        let clean = class.amplitude * libm::sin(2.0 * PI * freq * t + phase) + spec.noise * rng.normal();
        let spike = rng.bernoulli(spec.outlier_rate);
        let sign = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
        if !in_gap {
            let mut y = prof.level + prof.scale * clean;
            if spike {
                y += sign * spec.outlier_sigma * sigma;
                outliers.push(ts.len());
            }
            ts.push(t);
            ys.push(y);
        }
        t += prof.base_interval_s * (1.0 + spec.jitter * rng.uniform_range(-1.0, 1.0));
    }
    let s = IrregularSeries::new(v, id, Some(label), ts, ys)?;
    Ok((
        s,
        Injection {
            outlier_indices: outliers,
            gaps,
        },
    ))
}
