use num_complex::Complex64;
use proptest::prelude::*;

use weanscope_core::cwt::{xcorr2_norm, PsdMap};
use weanscope_core::eval::{classification_metrics, roc_curve, weighted_ensemble, TieBreak};
use weanscope_core::hpo::{bo_suggest, BoConfig, SearchSpace, SpaceKind, TrialRecord};
use weanscope_core::imaging::{render_plane, RenderOptions};
use weanscope_core::nn::layers::softmax;
use weanscope_core::resample::{nudft_complex, spectrum_correlation, Interpolant, Method};
use weanscope_core::rng::SeededRng;
use weanscope_core::series::{zscore, IrregularSeries, VariableId};

fn knots() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    prop::collection::vec((0.1f64..3.0, -5.0f64..5.0), 4..30).prop_map(|v| {
        let mut t = 0.0;
        let ts = v
            .iter()
            .map(|(dt, _)| {
                t += dt;
                t
            })
            .collect();
        (ts, v.into_iter().map(|(_, y)| y).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nudft_is_linear((t, x) in knots(), (_, y) in knots(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let n = t.len().min(y.len());
        let t = &t[..n];
        let xs: Vec<Complex64> = x[..n].iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let ys: Vec<Complex64> = y[..n].iter().map(|&v| Complex64::new(0.0, v)).collect();
        let comb: Vec<Complex64> = xs.iter().zip(&ys).map(|(p, q)| p * a + q * b).collect();
        let omegas: Vec<f64> = (0..16).map(|k| 0.3 * k as f64).collect();
        let fx = nudft_complex(t, &xs, &omegas).unwrap();
        let fy = nudft_complex(t, &ys, &omegas).unwrap();
        let fc = nudft_complex(t, &comb, &omegas).unwrap();
        for k in 0..omegas.len() {
            let want = fx[k] * a + fy[k] * b;
            prop_assert!((fc[k] - want).norm() < 1e-9 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn correlation_affine_invariant(v in prop::collection::vec(-10.0f64..10.0, 3..40), w in prop::collection::vec(-10.0f64..10.0, 3..40),
                                    s in 0.1f64..10.0, c in -5.0f64..5.0) {
        let n = v.len().min(w.len());
        let (a, b) = (&v[..n], &w[..n]);
        prop_assume!(weanscope_core::series::mean_std(a).1 > 1e-6 && weanscope_core::series::mean_std(b).1 > 1e-6);
        let r = spectrum_correlation(a, b).unwrap();
        let a2: Vec<f64> = a.iter().map(|x| s * x + c).collect();
        let r2 = spectrum_correlation(&a2, b).unwrap();
        prop_assert!((r - r2).abs() < 1e-9);
        prop_assert!((-1.0..=1.0).contains(&r));
    }

    #[test]
    fn pchip_stays_within_brackets((t, y) in knots()) {
        let mut y = y;
        y.sort_by(f64::total_cmp);
        let it = Interpolant::new(Method::Pchip, &t, &y).unwrap();
        for i in 0..t.len() - 1 {
            for k in 0..=10 {
                let q = t[i] + (t[i + 1] - t[i]) * k as f64 / 10.0;
                let v = it.eval(q).unwrap();
                prop_assert!(v >= y[i] - 1e-12 && v <= y[i + 1] + 1e-12);
            }
        }
    }

    #[test]
    fn interpolants_hit_knots((t, y) in knots()) {
        for m in Method::ALL {
            let it = Interpolant::new(m, &t, &y).unwrap();
            for (ti, yi) in t.iter().zip(&y) {
                prop_assert!((it.eval(*ti).unwrap() - yi).abs() < 1e-9, "{:?}", m);
            }
        }
    }

    #[test]
    fn zscore_normalizes((t, y) in knots()) {
        prop_assume!(weanscope_core::series::mean_std(&y).1 > 1e-6);
        let s = IrregularSeries::new(VariableId::Rr, "p", None, t, y).unwrap();
        let z = zscore(&s).unwrap();
        let (m, sd) = weanscope_core::series::mean_std(z.values());
        prop_assert!(m.abs() < 1e-9);
        prop_assert!((sd - 1.0).abs() < 1e-9);
    }

    #[test]
    fn render_in_unit_range(rows in 1usize..12, cols in 1usize..12, seed in any::<u64>(), h in 1usize..30, w in 1usize..30) {
        let mut rng = SeededRng::new(seed);
        let power: Vec<f64> = (0..rows * cols).map(|_| rng.uniform() * 1e3).collect();
        let map = PsdMap::new(rows, cols, power).unwrap();
        let p = render_plane(&map, &RenderOptions { out_h: h, out_w: w, log_compress: seed % 2 == 0 }).unwrap();
        prop_assert_eq!(p.data.len(), h * w);
        prop_assert!(p.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn xcorr_bounded(seed in any::<u64>(), h in 2usize..7, w in 2usize..7) {
        let mut rng = SeededRng::new(seed);
        let mk = |rng: &mut SeededRng| PsdMap::new(h, w, (0..h * w).map(|_| rng.uniform()).collect()).unwrap();
        let (a, b) = (mk(&mut rng), mk(&mut rng));
        let x = xcorr2_norm(&a, &b).unwrap();
        prop_assert_eq!((x.rows, x.cols), (2 * h - 1, 2 * w - 1));
        prop_assert!(x.values.iter().all(|&v| (-1.0..=1.0).contains(&v)));
    }

    #[test]
    fn auc_invariant_under_monotone_maps(seed in any::<u64>(), n in 4usize..60, k in 0.1f64..5.0) {
        let mut rng = SeededRng::new(seed);
        let labels: Vec<bool> = (0..n).map(|i| i == 0 || (i != 1 && rng.bernoulli(0.5))).collect();
        let scores: Vec<f64> = (0..n).map(|_| (rng.uniform() * 20.0).floor() / 20.0).collect();
        let mapped: Vec<f64> = scores.iter().map(|s| libm::exp(k * s) + s * s * s).collect();
        let a = roc_curve(&scores, &labels).unwrap().auc;
        let b = roc_curve(&mapped, &labels).unwrap().auc;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ensemble_is_probability(seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut rng = SeededRng::new(seed);
        let probs: Vec<[f64; 2]> = (0..8).map(|_| { let p = rng.uniform(); [1.0 - p, p] }).collect();
        let aucs: Vec<f64> = (0..8).map(|_| 0.01 + rng.uniform()).collect();
        let out = weighted_ensemble(&probs, &aucs, TieBreak::Failure).unwrap();
        prop_assert!(out.probs.iter().all(|&p| p >= 0.0));
        prop_assert!((out.probs[0] + out.probs[1] - 1.0).abs() < 1e-12);
        let scaled: Vec<f64> = aucs.iter().map(|a| a * c).collect();
        let out2 = weighted_ensemble(&probs, &scaled, TieBreak::Failure).unwrap();
        prop_assert_eq!(out.class, out2.class);
        prop_assert!((out.probs[1] - out2.probs[1]).abs() < 1e-12);
    }

    #[test]
    fn metrics_match_brute_force(seed in any::<u64>(), n in 1usize..80) {
        let mut rng = SeededRng::new(seed);
        let pred: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.5)).collect();
        let lab: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.5)).collect();
        let m = classification_metrics(&pred, &lab).unwrap();
        let count = |p: bool, l: bool| pred.iter().zip(&lab).filter(|(a, b)| **a == p && **b == l).count() as f64;
        let (tp, fp, fn_, tn) = (count(true, true), count(true, false), count(false, true), count(false, false));
        prop_assert_eq!(m.accuracy, (tp + tn) / n as f64);
        if tp + fp > 0.0 { prop_assert_eq!(m.precision, tp / (tp + fp)); }
        if tp + fn_ > 0.0 { prop_assert_eq!(m.recall, tp / (tp + fn_)); }
        if m.precision + m.recall > 0.0 {
            prop_assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_sums_to_one(logits in prop::collection::vec(-300.0f64..300.0, 2..10)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| v > 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn suggestions_within_bounds(seed in any::<u64>(), n in 0usize..12, scratch in any::<bool>()) {
        let space = SearchSpace::define(if scratch { SpaceKind::ScratchCnn } else { SpaceKind::ChannelHead });
        let cfg = BoConfig { candidates: 64, local_steps: 10, ..BoConfig::default() };
        let mut rng = SeededRng::new(seed);
        let mut history = Vec::new();
        for trial in 0..n {
            let point = bo_suggest(&history, &space, seed, &cfg).unwrap();
            prop_assert!(space.contains(&point), "{:?}", point);
            history.push(TrialRecord { trial, point, objective: rng.uniform(), epochs: 1, seed: 0, seconds: 0.0, failed: false });
        }
        let p = bo_suggest(&history, &space, seed, &cfg).unwrap();
        prop_assert!(space.contains(&p));
        prop_assert_eq!(p, bo_suggest(&history, &space, seed, &cfg).unwrap());
    }
}
