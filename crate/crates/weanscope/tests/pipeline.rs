use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use weanscope::io::model::{load_model, save_model};
use weanscope::io::tables::read_csv;
use weanscope::config::ModelMode;
use weanscope::pipeline::load_classifier;
use weanscope::{run_stage, PipelineConfig, PipelineError, Stage};
use weanscope_core::hpo::SpaceKind;

fn small(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.out_dir = out.to_path_buf();
    cfg.seed = 5;
    cfg.synth.record_length_s = 600.0;
    cfg.image.size = 32;
    cfg.model.train.max_epochs = 4;
    cfg.occlusion.options.window = 8;
    cfg.occlusion.options.stride = 4;
    cfg.occlusion.max_patients = Some(2);
    cfg
}

/// One full run shared by the read-only checks below.
fn shared() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap().keep();
        run_stage(Stage::All, &small(&dir)).unwrap();
        dir
    })
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let (header, rows) = read_csv(path).unwrap();
    let i = header.iter().position(|h| h == name).unwrap();
    rows.into_iter().map(|r| r[i].clone()).collect()
}

#[test]
fn every_stage_commits_with_a_stamp() {
    let out = shared();
    for st in ["synth", "clean", "sweep", "cwt", "render", "train", "eval", "occlude"] {
        let stamp: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join(st).join("stage.json")).unwrap()).unwrap();
        assert_eq!(stamp["stage"], st);
        assert_eq!(stamp["seed"], 5);
        assert!(!out.join(format!(".{st}.partial")).exists());
    }
    let (header, rows) = read_csv(&out.join("eval/metrics.csv")).unwrap();
    assert_eq!(header, ["run_id", "accuracy", "recall", "precision", "f1"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(
        read_csv(&out.join("cwt/wavelet_selection.csv")).unwrap().0,
        ["variable", "wavelet", "mean", "variance"]
    );
    assert_eq!(
        read_csv(&out.join("sweep/f_VT.csv")).unwrap().0,
        ["method", "fs_hz", "mean_correlation"]
    );
    assert!(out.join("render/images/p000__f_VT.png").is_file());
}

/// Peak of a zero-padded direct periodogram, independent of the wavelet code.
fn periodogram_peak(t: &[f64], y: &[f64]) -> f64 {
    let fs = 1.0 / (t[1] - t[0]);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 1..2000 {
        let f = 0.3 * k as f64 / 2000.0;
        if f > fs / 2.0 {
            break;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (n, v) in y.iter().enumerate() {
            let ph = 2.0 * PI * f * n as f64 / fs;
            re += (v - mean) * ph.cos();
            im -= (v - mean) * ph.sin();
        }
        let p = re * re + im * im;
        if p > best.1 {
            best = (f, p);
        }
    }
    best.0
}

#[test]
fn class_ridges_match_the_synthetic_signatures() {
    let out = shared();
    let labels = column(&out.join("cwt/ridges.csv"), "class_label");
    let ridges = column(&out.join("cwt/ridges.csv"), "ridge_hz");
    let ids = column(&out.join("cwt/ridges.csv"), "patient_id");
    let vars = column(&out.join("cwt/ridges.csv"), "variable");
    let mut by_class: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut oracle: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for i in 0..labels.len() {
        by_class.entry(labels[i].clone()).or_default().push(ridges[i].parse().unwrap());
        if vars[i] == "f_VT" {
            let path = out.join("cwt/resampled").join(format!("{}__f_VT.csv", ids[i]));
            let t: Vec<f64> = column(&path, "t_seconds").iter().map(|v| v.parse().unwrap()).collect();
            let y: Vec<f64> = column(&path, "value").iter().map(|v| v.parse().unwrap()).collect();
            oracle.entry(labels[i].clone()).or_default().push(periodogram_peak(&t, &y));
        }
    }
    for (class, want) in [("C0", 0.05), ("C1", 0.12)] {
        for table in [&by_class, &oracle] {
            let v = &table[class];
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            assert!((mean - want).abs() / want < 0.10, "{class}: mean ridge {mean}");
        }
    }
}

#[test]
fn zeroed_first_layer_gives_flat_occlusion_maps() {
    let src = shared();
    let dir = tempfile::tempdir().unwrap();
    for st in ["render", "train"] {
        copy_dir(&src.join(st), &dir.path().join(st));
    }
    let model_path = dir.path().join("train/run0/model.wsm");
    let mut m = load_model(&model_path).unwrap();
    let slot = m.network.slots()[0].clone();
    for i in slot.weight_range().chain(slot.bias_range()) {
        m.network.params[i] = 0.0;
    }
    save_model(&model_path, &m).unwrap();
    run_stage(Stage::Occlude, &small(dir.path())).unwrap();
    let files: Vec<PathBuf> = walk(&dir.path().join("occlude"))
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv") && !p.ends_with("summary.csv"))
        .collect();
    assert_eq!(files.len(), 16);
    for f in files {
        let (header, rows) = read_csv(&f).unwrap();
        assert_eq!(header.len(), 7);
        assert_eq!(rows.len(), 7);
        for v in rows.iter().flatten() {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{}", f.display());
        }
    }
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn copy_dir(from: &Path, to: &Path) {
    for f in walk(from) {
        let dest = to.join(f.strip_prefix(from).unwrap());
        std::fs::create_dir_all(dest.parent().unwrap()).unwrap();
        std::fs::copy(&f, &dest).unwrap();
    }
}

#[test]
fn missing_input_directory_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut cfg = small(&out);
    cfg.input_dir = Some(dir.path().join("nope"));
    let err = run_stage(Stage::All, &cfg).unwrap_err();
    assert!(matches!(err, PipelineError::ConfigInvalid(_)));
    assert_eq!(err.exit_code(), 2);
    assert!(!out.exists());
}

#[test]
fn stage_without_upstream_fails() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_stage(Stage::Eval, &small(dir.path())).unwrap_err();
    assert!(matches!(err, PipelineError::MissingUpstreamArtifact(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
    assert!(!dir.path().join("eval").exists());
}

#[test]
fn external_input_directory_is_read() {
    let src = shared();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(&dir.path().join("out"));
    cfg.input_dir = Some(src.join("synth"));
    for st in [Stage::Clean, Stage::Sweep] {
        run_stage(st, &cfg).unwrap();
    }
    assert_eq!(
        std::fs::read(src.join("sweep/selection.csv")).unwrap(),
        std::fs::read(dir.path().join("out/sweep/selection.csv")).unwrap()
    );
    assert!(!dir.path().join("out/synth").exists());
}

#[test]
fn channel_ensemble_trains_and_evaluates() {
    let src = shared();
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&src.join("render"), &dir.path().join("render"));
    let mut cfg = small(dir.path());
    cfg.ensemble.enabled = true;
    cfg.ensemble.head_filters = vec![4];
    cfg.ensemble.head_units = 16;
    for st in [Stage::Train, Stage::Eval] {
        run_stage(st, &cfg).unwrap();
    }
    let run = dir.path().join("train/run0");
    let heads: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("heads.json")).unwrap()).unwrap();
    assert_eq!(heads["aucs"].as_array().unwrap().len(), 8);
    let clf = load_classifier(&run).unwrap();
    assert!(matches!(clf, weanscope::pipeline::LoadedClassifier::Ensemble(_)));
    let p = column(&dir.path().join("eval/predictions.csv"), "p_failure");
    let q = column(&dir.path().join("eval/predictions.csv"), "p_success");
    for (a, b) in p.iter().zip(&q) {
        let s: f64 = a.parse::<f64>().unwrap() + b.parse::<f64>().unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn tuning_logs_every_trial() {
    let src = shared();
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&src.join("render"), &dir.path().join("render"));
    let mut cfg = small(dir.path());
    cfg.model.mode = ModelMode::Tune;
    cfg.hpo.space = SpaceKind::ScratchCnn;
    cfg.hpo.budget = 3;
    cfg.hpo.bo.initial_points = 2;
    cfg.hpo.max_epochs = 2;
    run_stage(Stage::Tune, &cfg).unwrap();
    let (header, rows) = read_csv(&dir.path().join("tune/trials.csv")).unwrap();
    assert_eq!(header, ["trial", "config_json", "objective_tnr", "epochs", "seed", "seconds"]);
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let tnr: f64 = r[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&tnr));
        let config: serde_json::Value = serde_json::from_str(&r[1]).unwrap();
        assert!(config.get("n_conv_layers").is_some());
    }
    run_stage(Stage::Eval, &cfg).unwrap();
    assert!(dir.path().join("eval/metrics.csv").is_file());
}

#[test]
fn search_space_must_match_the_ensemble_setting() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.model.mode = ModelMode::Tune;
    cfg.hpo.space = SpaceKind::ChannelHead;
    assert!(matches!(run_stage(Stage::Tune, &cfg), Err(PipelineError::ConfigInvalid(_))));
}

#[test]
fn all_equals_stages_run_one_by_one() {
    let src = shared();
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    for st in Stage::All.expand(&cfg) {
        run_stage(st, &cfg).unwrap();
    }
    for f in ["eval/metrics.csv", "eval/predictions.csv", "cwt/ridges.csv", "occlude/summary.csv"] {
        assert_eq!(std::fs::read(src.join(f)).unwrap(), std::fs::read(dir.path().join(f)).unwrap(), "{f}");
    }
}
