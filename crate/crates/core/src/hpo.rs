//! Hyperparameter search: a mixed discrete/continuous space, a Matérn-5/2
//! Gaussian-process surrogate and expected-improvement suggestions.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{mix, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dimension {
    /// Inclusive integer range.
    Integer { name: String, lo: i64, hi: i64 },
    /// One of a list of numeric values.
    Choice { name: String, options: Vec<f64> },
    /// One of a list of labels; the point stores the index.
    Categorical { name: String, options: Vec<String> },
    Continuous { name: String, lo: f64, hi: f64, log: bool },
}

impl Dimension {
    pub fn name(&self) -> &str {
        match self {
            Dimension::Integer { name, .. }
            | Dimension::Choice { name, .. }
            | Dimension::Categorical { name, .. }
            | Dimension::Continuous { name, .. } => name,
        }
    }

    fn encoded_width(&self) -> usize {
        match self {
            Dimension::Choice { options, .. } => options.len(),
            Dimension::Categorical { options, .. } => options.len(),
            _ => 1,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            Dimension::Integer { lo, hi, .. } => v.fract() == 0.0 && v >= *lo as f64 && v <= *hi as f64,
            Dimension::Choice { options, .. } => options.contains(&v),
            Dimension::Categorical { options, .. } => v.fract() == 0.0 && v >= 0.0 && (v as usize) < options.len(),
            Dimension::Continuous { lo, hi, .. } => v >= *lo && v <= *hi,
        }
    }

    fn encode(&self, v: f64, out: &mut Vec<f64>) {
        match self {
            Dimension::Integer { lo, hi, .. } => {
                out.push(if hi > lo { (v - *lo as f64) / (*hi - *lo) as f64 } else { 0.5 })
            }
            Dimension::Choice { options, .. } => out.extend(options.iter().map(|&o| (o == v) as u8 as f64)),
            Dimension::Categorical { options, .. } => {
                out.extend((0..options.len()).map(|i| (i as f64 == v) as u8 as f64))
            }
            Dimension::Continuous { lo, hi, log, .. } => out.push(if hi <= lo {
                0.5
            } else if *log {
                (libm::log(v) - libm::log(*lo)) / (libm::log(*hi) - libm::log(*lo))
            } else {
                (v - lo) / (hi - lo)
            }),
        }
    }

    /// Maps cube coordinates (this dimension's slice) to a valid value.
    fn decode(&self, u: &[f64]) -> f64 {
        let clamp = |x: f64| x.clamp(0.0, 1.0);
        match self {
            Dimension::Integer { lo, hi, .. } => {
                let v = *lo as f64 + libm::round(clamp(u[0]) * (*hi - *lo) as f64);
                v.clamp(*lo as f64, *hi as f64)
            }
            Dimension::Choice { options, .. } => options[argmax(u)],
            Dimension::Categorical { .. } => argmax(u) as f64,
            Dimension::Continuous { lo, hi, log, .. } => {
                let x = clamp(u[0]);
                let v = if *log {
                    libm::exp(libm::log(*lo) + x * (libm::log(*hi) - libm::log(*lo)))
                } else {
                    lo + x * (hi - lo)
                };
                v.clamp(*lo, *hi)
            }
        }
    }

    /// Uniform draw in cube coordinates that decodes to a uniformly chosen value.
    fn sample_cube(&self, u: f64, out: &mut Vec<f64>) {
        match self {
            Dimension::Choice { .. } | Dimension::Categorical { .. } => {
                let n = self.encoded_width();
                let k = ((u * n as f64) as usize).min(n - 1);
                out.extend((0..n).map(|i| (i == k) as u8 as f64));
            }
            Dimension::Integer { lo, hi, .. } => {
                let n = (hi - lo + 1) as f64;
                let k = (u * n).floor().min(n - 1.0);
                out.push(if hi > lo { k / (n - 1.0) } else { 0.5 });
            }
            _ => out.push(u),
        }
    }
}

fn argmax(u: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in u.iter().enumerate() {
        if v > u[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    ScratchCnn,
    ChannelHead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<Dimension>,
}

/// A point in natural units, one value per dimension.
pub type Point = Vec<f64>;

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        for d in &dims {
            let ok = match d {
                Dimension::Integer { lo, hi, .. } => lo <= hi,
                Dimension::Choice { options, .. } => !options.is_empty() && options.iter().all(|o| o.is_finite()),
                Dimension::Categorical { options, .. } => !options.is_empty(),
                Dimension::Continuous { lo, hi, log, .. } => {
                    lo.is_finite() && hi.is_finite() && lo <= hi && (!log || *lo > 0.0)
                }
            };
            if !ok {
                return Err(Error::InvalidParameters(alloc::format!("dimension {}", d.name())));
            }
        }
        if dims.is_empty() {
            return Err(Error::InvalidParameters("empty search space".into()));
        }
        Ok(Self { dims })
    }

    pub fn define(kind: SpaceKind) -> Self {
        let s = String::from;
        let dims = match kind {
            SpaceKind::ScratchCnn => vec![
                Dimension::Integer {
                    name: s("n_conv_layers"),
                    lo: 2,
                    hi: 5,
                },
                Dimension::Choice {
                    name: s("filters_per_layer"),
                    options: vec![32.0, 64.0, 128.0],
                },
                Dimension::Integer {
                    name: s("n_fc_layers"),
                    lo: 1,
                    hi: 3,
                },
                Dimension::Choice {
                    name: s("fc_units"),
                    options: vec![256.0, 512.0, 1024.0],
                },
                Dimension::Continuous {
                    name: s("learning_rate"),
                    lo: 1e-6,
                    hi: 1e-3,
                    log: true,
                },
                Dimension::Integer {
                    name: s("batch_size"),
                    lo: 10,
                    hi: 100,
                },
            ],
            SpaceKind::ChannelHead => vec![
                Dimension::Choice {
                    name: s("fc_units"),
                    options: (1..=16).map(|k| 32.0 * k as f64).collect(),
                },
                Dimension::Categorical {
                    name: s("optimizer"),
                    options: vec![s("adam"), s("sgd")],
                },
                Dimension::Continuous {
                    name: s("learning_rate"),
                    lo: 1e-6,
                    hi: 1e-3,
                    log: true,
                },
            ],
        };
        Self { dims }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name() == name)
    }

    pub fn get(&self, p: &[f64], name: &str) -> Option<f64> {
        self.index_of(name).and_then(|i| p.get(i).copied())
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dims.len() && self.dims.iter().zip(p).all(|(d, &v)| d.contains(v))
    }

    pub fn encoded_dim(&self) -> usize {
        self.dims.iter().map(|d| d.encoded_width()).sum()
    }

    pub fn encode(&self, p: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.encoded_dim());
        for (d, &v) in self.dims.iter().zip(p) {
            d.encode(v, &mut out);
        }
        out
    }

    pub fn decode(&self, u: &[f64]) -> Point {
        let mut off = 0;
        self.dims
            .iter()
            .map(|d| {
                let w = d.encoded_width();
                let v = d.decode(&u[off..off + w]);
                off += w;
                v
            })
            .collect()
    }

    fn random_point(&self, rng: &mut SeededRng) -> Point {
        let mut u = Vec::with_capacity(self.encoded_dim());
        for d in &self.dims {
            d.sample_cube(rng.uniform(), &mut u);
        }
        self.decode(&u)
    }

    /// Latin-hypercube design of `n` points: each dimension's `n` strata
    /// are used exactly once.
    pub fn initial_design(&self, n: usize, seed: u64) -> Vec<Point> {
        let mut rng = SeededRng::derive(seed, 0x1d);
        let columns: Vec<Vec<usize>> = self.dims.iter().map(|_| rng.permutation(n)).collect();
        (0..n)
            .map(|i| {
                let mut u = Vec::with_capacity(self.encoded_dim());
                for (d, col) in self.dims.iter().zip(&columns) {
                    let x = (col[i] as f64 + rng.uniform()) / n as f64;
                    d.sample_cube(x, &mut u);
                }
                self.decode(&u)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub objective: f64,
    pub epochs: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub point: Point,
    pub objective: f64,
    pub epochs: usize,
    pub seed: u64,
    pub seconds: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoConfig {
    pub initial_points: usize,
    pub candidates: usize,
    pub local_starts: usize,
    pub local_steps: usize,
    pub jitter: f64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            initial_points: 5,
            candidates: 256,
            local_starts: 5,
            local_steps: 30,
            jitter: 1e-10,
        }
    }
}

const LENGTHSCALES: [f64; 12] = [0.03, 0.05, 0.08, 0.12, 0.18, 0.25, 0.35, 0.5, 0.7, 1.0, 1.5, 2.2];

fn matern52(a: &[f64], b: &[f64], ls: f64) -> f64 {
    let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let s = libm::sqrt(5.0 * r2) / ls;
    (1.0 + s + s * s / 3.0) * libm::exp(-s)
}

fn cholesky(k: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = k[i * n + j];
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn forward_sub(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i * n + p] * x[p];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

fn back_sub(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for p in i + 1..n {
            s -= l[p * n + i] * x[p];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Zero-mean GP with unit signal variance on standardized targets.
#[derive(Debug, Clone)]
pub struct Gp {
    x: Vec<Vec<f64>>,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    pub lengthscale: f64,
    y_mean: f64,
    y_scale: f64,
}

impl Gp {
    /// Fits with the lengthscale maximizing the marginal likelihood over a
    /// fixed grid.
    pub fn fit(x: &[Vec<f64>], y: &[f64], jitter: f64) -> Result<Self> {
        let mut best: Option<(f64, Gp)> = None;
        for &ls in &LENGTHSCALES {
            if let Some((lml, gp)) = Self::fit_with(x, y, ls, jitter) {
                if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                    best = Some((lml, gp));
                }
            }
        }
        best.map(|(_, gp)| gp)
            .ok_or_else(|| Error::InvalidParameters("GP kernel matrix not positive definite".into()))
    }

    /// Returns `(log marginal likelihood, gp)`; jitter grows tenfold until
    /// the factorization succeeds.
    pub fn fit_with(x: &[Vec<f64>], y: &[f64], lengthscale: f64, jitter: f64) -> Option<(f64, Gp)> {
        let n = x.len();
        if n == 0 || y.len() != n {
            return None;
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n as f64;
        let y_scale = if var > 1e-24 { libm::sqrt(var) } else { 1.0 };
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = matern52(&x[i], &x[j], lengthscale);
            }
        }
        let mut eps = jitter;
        let chol = loop {
            let mut kj = k.clone();
            for i in 0..n {
                kj[i * n + i] += eps;
            }
            if let Some(l) = cholesky(&kj, n) {
                break l;
            }
            eps *= 10.0;
            if eps > 1e-2 {
                return None;
            }
        };
        let z = forward_sub(&chol, n, &ys);
        let alpha = back_sub(&chol, n, &z);
        let log_det: f64 = (0..n).map(|i| libm::log(chol[i * n + i])).sum::<f64>() * 2.0;
        let quad: f64 = ys.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let lml = -0.5 * quad - 0.5 * log_det;
        Some((
            lml,
            Gp {
                x: x.to_vec(),
                chol,
                alpha,
                lengthscale,
                y_mean,
                y_scale,
            },
        ))
    }

    /// Posterior mean and standard deviation in original units.
    pub fn predict(&self, q: &[f64]) -> (f64, f64) {
        let n = self.x.len();
        let ks: Vec<f64> = self.x.iter().map(|xi| matern52(xi, q, self.lengthscale)).collect();
        let mean: f64 = ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = forward_sub(&self.chol, n, &ks);
        let var = (1.0 - v.iter().map(|a| a * a).sum::<f64>()).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * libm::sqrt(var))
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * core::f64::consts::PI)
}

/// Expected improvement over `best` for maximization.
pub fn expected_improvement(mean: f64, std: f64, best: f64) -> f64 {
    let d = mean - best;
    if std <= 1e-12 {
        return d.max(0.0);
    }
    let z = d / std;
    d * normal_cdf(z) + std * normal_pdf(z)
}

/// Next point to evaluate. Deterministic in `(history, seed)`.
pub fn bo_suggest(history: &[TrialRecord], space: &SearchSpace, seed: u64, cfg: &BoConfig) -> Result<Point> {
    let q = cfg.initial_points.max(1);
    if history.len() < q {
        return Ok(space.initial_design(q, seed).swap_remove(history.len()));
    }
    let x: Vec<Vec<f64>> = history.iter().map(|r| space.encode(&r.point)).collect();
    let y: Vec<f64> = history.iter().map(|r| r.objective).collect();
    let gp = Gp::fit(&x, &y, cfg.jitter)?;
    let best = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut rng = SeededRng::derive(seed, history.len() as u64 + 1);
    let acq = |p: &Point| {
        let (m, s) = gp.predict(&space.encode(p));
        expected_improvement(m, s, best)
    };

    let mut scored: Vec<(f64, Point)> = (0..cfg.candidates.max(1))
        .map(|_| {
            let p = space.random_point(&mut rng);
            (acq(&p), p)
        })
        .collect();
    // stable sort keeps candidate order among equal scores
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(cfg.local_starts.max(1));

    let d = space.encoded_dim();
    let mut winner = scored[0].clone();
    for (score0, p0) in scored {
        let (mut score, mut p) = (score0, p0);
        let mut step = 0.1;
        for _ in 0..cfg.local_steps {
            let u = space.encode(&p);
            let trial: Vec<f64> = (0..d).map(|k| u[k] + step * rng.normal()).collect();
            let cand = space.decode(&trial);
            let s = acq(&cand);
            if s > score {
                score = s;
                p = cand;
            } else {
                step = (step * 0.8).max(1e-3);
            }
        }
        if score > winner.0 {
            winner = (score, p);
        }
    }
    Ok(winner.1)
}

/// Runs exactly `budget` evaluations. Objective errors become failed
/// trials with objective 0. The best trial is the first with the maximal
/// objective.
pub fn bo_run<F, E>(
    mut objective: F,
    space: &SearchSpace,
    budget: usize,
    seed: u64,
    cfg: &BoConfig,
) -> Result<(TrialRecord, Vec<TrialRecord>)>
where
    F: FnMut(&Point, u64) -> core::result::Result<Evaluation, E>,
{
    if budget == 0 {
        return Err(Error::InvalidParameters("budget must be at least 1".into()));
    }
    let mut history: Vec<TrialRecord> = Vec::with_capacity(budget);
    for trial in 0..budget {
        let point = bo_suggest(&history, space, seed, cfg)?;
        let trial_seed = mix(seed, 0x7e57 + trial as u64);
        let rec = match objective(&point, trial_seed) {
            Ok(ev) if ev.objective.is_finite() => TrialRecord {
                trial,
                point,
                objective: ev.objective,
                epochs: ev.epochs,
                seed: trial_seed,
                seconds: ev.seconds,
                failed: false,
            },
            Ok(ev) => TrialRecord {
                trial,
                point,
                objective: 0.0,
                epochs: ev.epochs,
                seed: trial_seed,
                seconds: ev.seconds,
                failed: true,
            },
            Err(_) => TrialRecord {
                trial,
                point,
                objective: 0.0,
                epochs: 0,
                seed: trial_seed,
                seconds: 0.0,
                failed: true,
            },
        };
        history.push(rec);
    }
    let mut best = 0;
    for (i, r) in history.iter().enumerate() {
        if r.objective > history[best].objective {
            best = i;
        }
    }
    Ok((history[best].clone(), history))
}

/// Same budget, points drawn uniformly from the space.
pub fn random_search<F>(mut objective: F, space: &SearchSpace, budget: usize, seed: u64) -> Vec<(Point, f64)>
where
    F: FnMut(&Point) -> f64,
{
    let mut rng = SeededRng::derive(seed, 0x4a4d);
    (0..budget)
        .map(|_| {
            let p = space.random_point(&mut rng);
            let v = objective(&p);
            (p, v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::convert::Infallible;

    fn unit_line() -> SearchSpace {
        SearchSpace::new(vec![Dimension::Continuous {
            name: "x".into(),
            lo: 0.0,
            hi: 1.0,
            log: false,
        }])
        .unwrap()
    }

    #[test]
    fn scratch_space_bounds() {
        let s = SearchSpace::define(SpaceKind::ScratchCnn);
        assert!(s.contains(&[3.0, 64.0, 2.0, 512.0, 1e-4, 32.0]));
        assert!(!s.contains(&[6.0, 64.0, 2.0, 512.0, 1e-4, 32.0]));
        assert!(!s.contains(&[3.0, 48.0, 2.0, 512.0, 1e-4, 32.0]));
        assert!(!s.contains(&[3.0, 64.0, 2.0, 512.0, 2e-3, 32.0]));
        let h = SearchSpace::define(SpaceKind::ChannelHead);
        match &h.dims[0] {
            Dimension::Choice { options, .. } => {
                assert_eq!(options.len(), 16);
                assert_eq!((options[0], options[15]), (32.0, 512.0));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn encode_decode_round_trip() {
        let s = SearchSpace::define(SpaceKind::ScratchCnn);
        let p = vec![4.0, 128.0, 1.0, 256.0, 3e-5, 77.0];
        let back = s.decode(&s.encode(&p));
        for (a, b) in p.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn initial_design_inside_and_deterministic() {
        let s = SearchSpace::define(SpaceKind::ScratchCnn);
        let a = bo_suggest(&[], &s, 3, &BoConfig::default()).unwrap();
        assert!(s.contains(&a));
        assert_eq!(a, bo_suggest(&[], &s, 3, &BoConfig::default()).unwrap());
        let design = s.initial_design(5, 3);
        // one point per stratum on the integer batch axis
        let mut strata: Vec<usize> = design.iter().map(|p| ((p[5] - 10.0) / 91.0 * 5.0) as usize).collect();
        strata.sort();
        assert_eq!(strata, [0, 1, 2, 3, 4]);
    }

    #[test]
    fn gp_interpolates() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0, (i * i) as f64 / 25.0]).collect();
        let y: Vec<f64> = x.iter().map(|p| libm::sin(3.0 * p[0]) + p[1]).collect();
        let gp = Gp::fit(&x, &y, 1e-10).unwrap();
        for (p, &v) in x.iter().zip(&y) {
            let (m, s) = gp.predict(p);
            assert!((m - v).abs() < 1e-6, "{m} vs {v}");
            assert!(s < 1e-3);
        }
    }

    #[test]
    fn quadratic_optimum_found() {
        let s = unit_line();
        let (best, hist) = bo_run(
            |p: &Point, _| {
                Ok::<_, Infallible>(Evaluation {
                    objective: -(p[0] - 0.3) * (p[0] - 0.3),
                    epochs: 0,
                    seconds: 0.0,
                })
            },
            &s,
            20,
            1,
            &BoConfig::default(),
        )
        .unwrap();
        assert_eq!(hist.len(), 20);
        // dense grid oracle for the optimum location
        let grid_best = (0..=10_000)
            .map(|i| i as f64 / 10_000.0)
            .max_by(|a, b| (-(a - 0.3) * (a - 0.3)).total_cmp(&(-(b - 0.3) * (b - 0.3))))
            .unwrap();
        assert!((best.point[0] - grid_best).abs() < 0.05, "{:?}", best.point);
    }

    #[test]
    fn failures_score_zero_and_budget_exact() {
        let s = unit_line();
        let (best, hist) = bo_run(
            |p: &Point, _| {
                if p[0] > 0.5 {
                    Err("boom")
                } else {
                    Ok(Evaluation {
                        objective: -1.0,
                        epochs: 1,
                        seconds: 0.0,
                    })
                }
            },
            &s,
            7,
            2,
            &BoConfig::default(),
        )
        .unwrap();
        assert_eq!(hist.len(), 7);
        assert!(hist.iter().all(|r| r.failed == (r.point[0] > 0.5)));
        assert!(hist.iter().filter(|r| r.failed).all(|r| r.objective == 0.0));
        if hist.iter().any(|r| r.failed) {
            assert!(best.failed);
        }
    }

    #[test]
    fn constant_objective_deterministic() {
        let s = SearchSpace::define(SpaceKind::ChannelHead);
        let run = || {
            bo_run(
                |_: &Point, _| {
                    Ok::<_, Infallible>(Evaluation {
                        objective: 0.5,
                        epochs: 0,
                        seconds: 0.0,
                    })
                },
                &s,
                8,
                4,
                &BoConfig::default(),
            )
            .unwrap()
        };
        let (b1, h1) = run();
        let (b2, h2) = run();
        assert_eq!(h1, h2);
        assert_eq!(b1.trial, 0);
        assert_eq!(b1, b2);
        assert!(h1.iter().all(|r| s.contains(&r.point)));
    }

    #[test]
    fn ei_basics() {
        assert_eq!(expected_improvement(1.0, 0.0, 0.5), 0.5);
        assert_eq!(expected_improvement(0.0, 0.0, 0.5), 0.0);
        let e = expected_improvement(0.0, 1.0, 0.0);
        assert!((e - normal_pdf(0.0)).abs() < 1e-15);
        assert!((normal_cdf(1.96) - 0.975).abs() < 1e-3);
    }
}
