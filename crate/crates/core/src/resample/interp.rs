use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{IrregularSeries, VariableId};

/// Interpolation methods, in the order used for tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linear,
    Nearest,
    Next,
    Previous,
    Pchip,
    Spline,
    Makima,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Linear,
        Method::Nearest,
        Method::Next,
        Method::Previous,
        Method::Pchip,
        Method::Spline,
        Method::Makima,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Linear => "linear",
            Method::Nearest => "nearest",
            Method::Next => "next",
            Method::Previous => "previous",
            Method::Pchip => "pchip",
            Method::Spline => "spline",
            Method::Makima => "makima",
        }
    }

    pub fn min_knots(self) -> usize {
        match self {
            Method::Pchip | Method::Spline | Method::Makima => 4,
            _ => 2,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameters(alloc::format!("unknown interpolation method {s:?}")))
    }
}

/// Evenly sampled values starting at `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformSeries {
    pub variable: VariableId,
    pub patient_id: String,
    pub fs: f64,
    pub t0: f64,
    pub values: Vec<f64>,
}

impl UniformSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 / self.fs
    }
}

/// A prepared interpolant over fixed knots. Cubic methods are stored as
/// Hermite slopes per knot.
#[derive(Debug, Clone)]
pub struct Interpolant<'a> {
    method: Method,
    t: &'a [f64],
    y: &'a [f64],
    slopes: Vec<f64>,
}

impl<'a> Interpolant<'a> {
    pub fn new(method: Method, t: &'a [f64], y: &'a [f64]) -> Result<Self> {
        if t.len() != y.len() {
            return Err(Error::LengthMismatch(t.len(), y.len()));
        }
        if t.len() < method.min_knots() {
            return Err(Error::TooFewKnots {
                need: method.min_knots(),
                got: t.len(),
            });
        }
        let slopes = match method {
            Method::Pchip => pchip_slopes(t, y),
            Method::Spline => natural_spline_slopes(t, y),
            Method::Makima => makima_slopes(t, y),
            _ => Vec::new(),
        };
        Ok(Self { method, t, y, slopes })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Index `k` of the interval `[t_k, t_{k+1}]` containing `q`.
    fn interval(&self, q: f64) -> usize {
        let n = self.t.len();
        match self.t.binary_search_by(|v| v.partial_cmp(&q).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => (i.max(1) - 1).min(n - 2),
        }
    }

    pub fn eval(&self, q: f64) -> Result<f64> {
        let (lo, hi) = (self.t[0], self.t[self.t.len() - 1]);
        if !(q >= lo && q <= hi) {
            return Err(Error::OutOfRange { t: q, lo, hi });
        }
        Ok(self.eval_in(self.interval(q), q))
    }

    fn eval_in(&self, k: usize, q: f64) -> f64 {
        let (t, y) = (self.t, self.y);
        let (t0, t1) = (t[k], t[k + 1]);
        if q == t0 {
            return y[k];
        }
        if q == t1 {
            return y[k + 1];
        }
        match self.method {
            Method::Linear => y[k] + (y[k + 1] - y[k]) * (q - t0) / (t1 - t0),
            // exact midpoints go to the later knot
            Method::Nearest => {
                if q - t0 < t1 - q {
                    y[k]
                } else {
                    y[k + 1]
                }
            }
            Method::Next => y[k + 1],
            Method::Previous => y[k],
            Method::Pchip | Method::Spline | Method::Makima => {
                hermite(t0, t1, y[k], y[k + 1], self.slopes[k], self.slopes[k + 1], q)
            }
        }
    }

    /// Evaluates sorted queries with a forward-moving interval cursor.
    pub fn eval_sorted(&self, queries: &[f64]) -> Result<Vec<f64>> {
        let (lo, hi) = (self.t[0], self.t[self.t.len() - 1]);
        let n = self.t.len();
        let mut k = 0;
        let mut out = Vec::with_capacity(queries.len());
        let mut prev = f64::NEG_INFINITY;
        for &q in queries {
            if !(q >= lo && q <= hi) {
                return Err(Error::OutOfRange { t: q, lo, hi });
            }
            if q < prev {
                k = self.interval(q);
            }
            while k < n - 2 && self.t[k + 1] < q {
                k += 1;
            }
            out.push(self.eval_in(k, q));
            prev = q;
        }
        Ok(out)
    }
}

fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, q: f64) -> f64 {
    let h = t1 - t0;
    let s = q - t0;
    let delta = (y1 - y0) / h;
    let c = (3.0 * delta - 2.0 * d0 - d1) / h;
    let b = (d0 - 2.0 * delta + d1) / (h * h);
    y0 + s * (d0 + s * (c + s * b))
}

fn secants(t: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let del = (0..h.len()).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    (h, del)
}

fn same_sign(a: f64, b: f64) -> bool {
    (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0)
}

/// Fritsch-Carlson slopes with the shape-preserving three-point end rule.
fn pchip_slopes(t: &[f64], y: &[f64]) -> Vec<f64> {
    let (h, del) = secants(t, y);
    let n = t.len();
    let mut d = alloc::vec![0.0; n];
    for k in 1..n - 1 {
        if same_sign(del[k - 1], del[k]) {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
        }
    }
    d[0] = pchip_end(h[0], h[1], del[0], del[1]);
    d[n - 1] = pchip_end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

fn pchip_end(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if !same_sign(d, del0) {
        0.0
    } else if !same_sign(del0, del1) && libm::fabs(d) > libm::fabs(3.0 * del0) {
        3.0 * del0
    } else {
        d
    }
}

/// Knot slopes of the natural cubic spline (zero curvature at both ends).
fn natural_spline_slopes(t: &[f64], y: &[f64]) -> Vec<f64> {
    let (h, del) = secants(t, y);
    let n = t.len();
    // Thomas algorithm for the second derivatives m[1..n-1]; m[0] = m[n-1] = 0
    let mut m = alloc::vec![0.0; n];
    let inner = n - 2;
    let mut c_prime = alloc::vec![0.0; inner];
    let mut d_prime = alloc::vec![0.0; inner];
    for j in 0..inner {
        let i = j + 1;
        let a = h[i - 1];
        let b = 2.0 * (h[i - 1] + h[i]);
        let c = h[i];
        let rhs = 6.0 * (del[i] - del[i - 1]);
        if j == 0 {
            c_prime[j] = c / b;
            d_prime[j] = rhs / b;
        } else {
            let denom = b - a * c_prime[j - 1];
            c_prime[j] = c / denom;
            d_prime[j] = (rhs - a * d_prime[j - 1]) / denom;
        }
    }
    for j in (0..inner).rev() {
        let next = if j + 1 < inner { m[j + 2] } else { 0.0 };
        m[j + 1] = d_prime[j] - c_prime[j] * next;
    }
    let mut d = alloc::vec![0.0; n];
    for i in 0..n - 1 {
        d[i] = del[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0;
    }
    d[n - 1] = del[n - 2] + h[n - 2] * (m[n - 2] + 2.0 * m[n - 1]) / 6.0;
    d
}

/// Modified Akima slopes: secants extended by two linear ghosts at each end,
/// weights `|d_{i+1} - d_i| + |d_{i+1} + d_i| / 2`.
fn makima_slopes(t: &[f64], y: &[f64]) -> Vec<f64> {
    let (_, del) = secants(t, y);
    let n = t.len();
    let m = del.len();
    // ext[j + 2] = del[j]
    let mut ext = alloc::vec![0.0; m + 4];
    ext[2..m + 2].copy_from_slice(&del);
    ext[1] = 2.0 * ext[2] - ext[3];
    ext[0] = 2.0 * ext[1] - ext[2];
    ext[m + 2] = 2.0 * ext[m + 1] - ext[m];
    ext[m + 3] = 2.0 * ext[m + 2] - ext[m + 1];
    let mut d = alloc::vec![0.0; n];
    for i in 0..n {
        // slopes around knot i: ext[i], ext[i+1] (left), ext[i+2], ext[i+3] (right)
        let w1 = libm::fabs(ext[i + 3] - ext[i + 2]) + libm::fabs(ext[i + 3] + ext[i + 2]) / 2.0;
        let w2 = libm::fabs(ext[i + 1] - ext[i]) + libm::fabs(ext[i + 1] + ext[i]) / 2.0;
        d[i] = if w1 + w2 == 0.0 {
            0.0
        } else {
            (w1 * ext[i + 1] + w2 * ext[i + 2]) / (w1 + w2)
        };
    }
    d
}

/// Single-point evaluation of `method` on the series knots.
pub fn interp_eval(series: &IrregularSeries, method: Method, t_query: f64) -> Result<f64> {
    Interpolant::new(method, series.timestamps(), series.values())?.eval(t_query)
}

/// Number of samples on the grid `t0 + n / fs` covering `span` seconds.
pub fn grid_len(span: f64, fs: f64) -> usize {
    libm::floor(span * fs + 1e-9) as usize + 1
}

/// Samples `t0 + n / fs` for `n = 0..=floor(span * fs)`.
pub fn resample_uniform(series: &IrregularSeries, method: Method, fs: f64) -> Result<UniformSeries> {
    if !(fs > 0.0) || !fs.is_finite() {
        return Err(Error::InvalidParameters(alloc::format!("sampling frequency {fs}")));
    }
    let interp = Interpolant::new(method, series.timestamps(), series.values())?;
    let t0 = series.t_first();
    let t_last = series.t_last();
    let n = grid_len(series.span(), fs);
    let queries: Vec<f64> = (0..n).map(|i| (t0 + i as f64 / fs).min(t_last)).collect();
    let values = interp.eval_sorted(&queries)?;
    Ok(UniformSeries {
        variable: series.variable,
        patient_id: series.patient_id.clone(),
        fs,
        t0,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn s(t: Vec<f64>, y: Vec<f64>) -> IrregularSeries {
        IrregularSeries::new(VariableId::Vt, "p", None, t, y).unwrap()
    }

    #[test]
    fn knots_are_reproduced_by_every_method() {
        let t = vec![0.0, 0.7, 1.1, 2.5, 3.0, 4.2];
        let y = vec![1.0, -2.0, 0.5, 3.0, 3.0, -1.0];
        let series = s(t.clone(), y.clone());
        for m in Method::ALL {
            for (ti, yi) in t.iter().zip(&y) {
                assert_eq!(interp_eval(&series, m, *ti).unwrap(), *yi, "{m}");
            }
        }
    }

    #[test]
    fn linear_midpoint() {
        let series = s(vec![0.0, 1.0], vec![0.0, 2.0]);
        assert_eq!(interp_eval(&series, Method::Linear, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn step_methods() {
        let series = s(vec![0.0, 1.0, 2.0], vec![10.0, 20.0, 30.0]);
        assert_eq!(interp_eval(&series, Method::Next, 0.2).unwrap(), 20.0);
        assert_eq!(interp_eval(&series, Method::Previous, 1.9).unwrap(), 20.0);
        assert_eq!(interp_eval(&series, Method::Nearest, 1.4).unwrap(), 20.0);
        assert_eq!(interp_eval(&series, Method::Nearest, 1.6).unwrap(), 30.0);
        assert_eq!(interp_eval(&series, Method::Nearest, 1.5).unwrap(), 30.0);
    }

    #[test]
    fn errors() {
        let series = s(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]);
        assert!(matches!(
            interp_eval(&series, Method::Linear, 2.5),
            Err(Error::OutOfRange { .. })
        ));
        assert_eq!(
            interp_eval(&series, Method::Spline, 0.5).unwrap_err(),
            Error::TooFewKnots { need: 4, got: 3 }
        );
    }

    #[test]
    fn grid_length_formula() {
        let series = s((0..=10).map(|i| i as f64).collect(), vec![1.0; 11]);
        assert_eq!(resample_uniform(&series, Method::Linear, 0.3).unwrap().len(), 4);
        assert_eq!(resample_uniform(&series, Method::Linear, 1.0).unwrap().len(), 11);
    }

    #[test]
    fn uniform_input_preserved() {
        let y: Vec<f64> = (0..20).map(|i| libm::sin(i as f64)).collect();
        let series = s((0..20).map(|i| i as f64).collect(), y.clone());
        for m in Method::ALL {
            let u = resample_uniform(&series, m, 1.0).unwrap();
            assert_eq!(u.values, y, "{m}");
        }
    }

    #[test]
    fn linear_reproduces_affine() {
        let t = vec![0.0, 0.3, 1.7, 2.2, 5.0];
        let y: Vec<f64> = t.iter().map(|v| 2.0 * v - 1.0).collect();
        let u = resample_uniform(&s(t, y), Method::Linear, 3.7).unwrap();
        for (i, v) in u.values.iter().enumerate() {
            let ti = i as f64 / 3.7;
            assert!((v - (2.0 * ti - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn sorted_eval_matches_pointwise() {
        let t = vec![0.0, 0.5, 1.7, 2.0, 3.3, 4.0];
        let y = vec![0.0, 1.0, -1.0, 2.0, 0.0, 1.0];
        let q: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
        for m in Method::ALL {
            let it = Interpolant::new(m, &t, &y).unwrap();
            let a = it.eval_sorted(&q).unwrap();
            for (qi, ai) in q.iter().zip(&a) {
                assert_eq!(it.eval(*qi).unwrap(), *ai);
            }
        }
    }
}
