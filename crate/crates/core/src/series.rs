//! Irregular series and the three cleaning steps applied before resampling:
//! outlier replacement, longest-segment extraction and Z-score scaling.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The eight physiological variables recorded per patient, in the canonical
/// channel order used for image tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariableId {
    /// Respiratory rate over tidal volume (rapid shallow breathing index).
    #[serde(rename = "f_VT")]
    FVt,
    /// Mean inspired flow.
    #[serde(rename = "VT_TI")]
    VtTi,
    /// Breath duration.
    #[serde(rename = "T_Tot")]
    TTot,
    /// Inspiratory fraction.
    #[serde(rename = "TI_TTot")]
    TiTTot,
    #[serde(rename = "T_I")]
    Ti,
    #[serde(rename = "T_E")]
    Te,
    #[serde(rename = "V_T")]
    Vt,
    /// Beat-to-beat interval from the ECG.
    #[serde(rename = "RR")]
    Rr,
}

impl VariableId {
    pub const ALL: [VariableId; 8] = [
        VariableId::FVt,
        VariableId::VtTi,
        VariableId::TTot,
        VariableId::TiTTot,
        VariableId::Ti,
        VariableId::Te,
        VariableId::Vt,
        VariableId::Rr,
    ];

    /// Filesystem-safe identifier used in `<patient>__<variable>.csv`.
    pub fn as_str(self) -> &'static str {
        match self {
            VariableId::FVt => "f_VT",
            VariableId::VtTi => "VT_TI",
            VariableId::TTot => "T_Tot",
            VariableId::TiTTot => "TI_TTot",
            VariableId::Ti => "T_I",
            VariableId::Te => "T_E",
            VariableId::Vt => "V_T",
            VariableId::Rr => "RR",
        }
    }

    /// Position in the canonical channel order.
    pub fn channel(self) -> usize {
        Self::ALL.iter().position(|&v| v == self).unwrap()
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v = match s {
            "f_VT" | "f/V_T" | "fVT" => VariableId::FVt,
            "VT_TI" | "V_T/T_I" => VariableId::VtTi,
            "T_Tot" | "TTot" => VariableId::TTot,
            "TI_TTot" | "T_I/T_Tot" => VariableId::TiTTot,
            "T_I" | "TI" => VariableId::Ti,
            "T_E" | "TE" => VariableId::Te,
            "V_T" | "VT" => VariableId::Vt,
            "RR" => VariableId::Rr,
            other => return Err(Error::InvalidSeries(alloc::format!("unknown variable {other:?}"))),
        };
        Ok(v)
    }
}

/// Weaning outcome group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    /// Weaning success.
    C0,
    /// Weaning failure, reconnected to the ventilator.
    C1,
    /// Passed the trial but reintubated within 48 h.
    C2,
}

impl ClassLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::C0 => "C0",
            ClassLabel::C1 => "C1",
            ClassLabel::C2 => "C2",
        }
    }

    /// Binary target for the two-class models; C2 counts as failure.
    pub fn is_failure(self) -> bool {
        !matches!(self, ClassLabel::C0)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "C0" => Ok(ClassLabel::C0),
            "C1" => Ok(ClassLabel::C1),
            "C2" => Ok(ClassLabel::C2),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

/// Timestamped samples with non-uniform spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularSeries {
    pub variable: VariableId,
    pub patient_id: String,
    pub class_label: Option<ClassLabel>,
    timestamps: Vec<f64>,
    values: Vec<f64>,
}

impl IrregularSeries {
    /// Validates strictly increasing finite timestamps and finite values.
    pub fn new(
        variable: VariableId,
        patient_id: impl Into<String>,
        class_label: Option<ClassLabel>,
        timestamps: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch(timestamps.len(), values.len()));
        }
        if timestamps.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(alloc::format!("non-finite value at index {i}")));
        }
        if let Some(i) = timestamps.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidSeries(alloc::format!("non-finite timestamp at index {i}")));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSeries(alloc::format!(
                "timestamps not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self {
            variable,
            patient_id: patient_id.into(),
            class_label,
            timestamps,
            values,
        })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t_first(&self) -> f64 {
        self.timestamps[0]
    }

    pub fn t_last(&self) -> f64 {
        self.timestamps[self.timestamps.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.t_last() - self.t_first()
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            values,
            ..self.clone()
        }
    }

    fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            timestamps: self.timestamps[start..=end].to_vec(),
            values: self.values[start..=end].to_vec(),
            ..self.clone()
        }
    }
}

/// Audit trail of one cleaning pass. Index pairs are inclusive.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub n_outliers_replaced: usize,
    pub replaced_indices: Vec<usize>,
    pub segments_found: Vec<(usize, usize)>,
    pub chosen_segment: Option<(usize, usize)>,
    pub mean_used: Option<f64>,
    pub std_used: Option<f64>,
}

impl CleaningReport {
    /// Folds the report of a later step into this one.
    pub fn merge(mut self, other: CleaningReport) -> Self {
        self.n_outliers_replaced += other.n_outliers_replaced;
        self.replaced_indices.extend(other.replaced_indices);
        if !other.segments_found.is_empty() {
            self.segments_found = other.segments_found;
            self.chosen_segment = other.chosen_segment;
        }
        if other.mean_used.is_some() {
            self.mean_used = other.mean_used;
            self.std_used = other.std_used;
        }
        self
    }
}

/// Arithmetic mean and sample (n-1) standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, libm::sqrt(ss / (n - 1) as f64))
}

/// Replaces samples more than `k_sigma` standard deviations from the mean by
/// the mean of up to `neighbor_window` samples on each side. Statistics are
/// taken once from the input; neighbor means use the original values.
pub fn replace_outliers(
    series: &IrregularSeries,
    k_sigma: f64,
    neighbor_window: usize,
) -> Result<(IrregularSeries, CleaningReport)> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let x = series.values();
    let n = x.len();
    let (mean, std) = mean_std(x);
    let mut report = CleaningReport {
        mean_used: Some(mean),
        std_used: Some(std),
        ..Default::default()
    };
    if !(std > 0.0) || n < 2 {
        return Ok((series.clone(), report));
    }
    let limit = k_sigma * std;
    let mut out = x.to_vec();
    for i in 0..n {
        if libm::fabs(x[i] - mean) <= limit {
            continue;
        }
        let lo = i.saturating_sub(neighbor_window);
        let hi = (i + neighbor_window).min(n - 1);
        let (mut sum, mut count) = (0.0, 0usize);
        for j in (lo..=hi).filter(|&j| j != i) {
            sum += x[j];
            count += 1;
        }
        if count > 0 {
            out[i] = sum / count as f64;
            report.replaced_indices.push(i);
        }
    }
    report.n_outliers_replaced = report.replaced_indices.len();
    Ok((series.with_values(out), report))
}

/// Splits at every timestamp gap larger than `max_gap_s` and keeps the
/// segment with the most samples; ties go to the earliest segment.
pub fn segment_longest(series: &IrregularSeries, max_gap_s: f64) -> Result<(IrregularSeries, CleaningReport)> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let t = series.timestamps();
    let mut segments = Vec::new();
    let mut start = 0;
    for i in 1..t.len() {
        if t[i] - t[i - 1] > max_gap_s {
            segments.push((start, i - 1));
            start = i;
        }
    }
    segments.push((start, t.len() - 1));
    let mut best = segments[0];
    for &seg in &segments[1..] {
        if seg.1 - seg.0 > best.1 - best.0 {
            best = seg;
        }
    }
    let report = CleaningReport {
        segments_found: segments,
        chosen_segment: Some(best),
        ..Default::default()
    };
    Ok((series.slice(best.0, best.1), report))
}

/// Z-score with the sample standard deviation.
pub fn zscore(series: &IrregularSeries) -> Result<IrregularSeries> {
    let (mean, std) = zscore_params(series)?;
    let out = series.values().iter().map(|x| (x - mean) / std).collect();
    Ok(series.with_values(out))
}

fn zscore_params(series: &IrregularSeries) -> Result<(f64, f64)> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let (mean, std) = mean_std(series.values());
    if !(std > 0.0) {
        return Err(Error::SigmaZero);
    }
    Ok((mean, std))
}

/// Parameters of the full cleaning chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningParams {
    pub k_sigma: f64,
    pub neighbor_window: usize,
    pub max_gap_s: f64,
}

impl Default for CleaningParams {
    fn default() -> Self {
        Self {
            k_sigma: 5.0,
            neighbor_window: 3,
            max_gap_s: 20.0,
        }
    }
}

/// Outliers, then segmentation, then Z-score.
pub fn clean(series: &IrregularSeries, params: &CleaningParams) -> Result<(IrregularSeries, CleaningReport)> {
    let (s1, r1) = replace_outliers(series, params.k_sigma, params.neighbor_window)?;
    let (s2, r2) = segment_longest(&s1, params.max_gap_s)?;
    let (mean, std) = zscore_params(&s2)?;
    let s3 = zscore(&s2)?;
    let mut report = r1.merge(r2);
    report.mean_used = Some(mean);
    report.std_used = Some(std);
    Ok((s3, report))
}
