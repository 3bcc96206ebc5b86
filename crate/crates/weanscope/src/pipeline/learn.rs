//! Model stages: training, hyperparameter search, evaluation and
//! occlusion maps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use weanscope_core::eval::{
    classification_metrics, roc_curve, run_aggregate, true_negative_rate, weighted_ensemble, MetricSet, TieBreak,
};
use weanscope_core::hpo::{bo_run, Evaluation, SearchSpace, SpaceKind};
use weanscope_core::imaging::{resize_bilinear, ImageTensor, Plane};
use weanscope_core::nn::{
    build_stack, build_table4_variant, train_early_stop, Classifier, Example, History, ModelSpec, OptimizerKind,
    Shape, TrainConfig, TrainedModel,
};
use weanscope_core::occlusion::occlusion_map;
use weanscope_core::rng::{mix, SeededRng};
use weanscope_core::series::{ClassLabel, VariableId};

use super::{Ctx, Stage, StageDir};
use crate::error::{PipelineError, Result};
use crate::exec::Rayon;
use crate::io::model::{load_model, save_model};
use crate::io::series::{Manifest, MANIFEST};
use crate::io::tables::{point_json, write_csv, write_metrics, write_trial_log};
use crate::io::tensor::read_tensor;
use crate::io::{self, image};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub run: usize,
    pub seed: u64,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// Per-class shuffled split of C0 and C1 into train and validation; C2 is
/// the test set.
pub fn split_patients(manifest: &Manifest, run: usize, seed: u64, train_fraction: f64) -> Split {
    let run_seed = mix(seed, run as u64);
    let mut rng = SeededRng::derive(run_seed, 0x5b1);
    let (mut train, mut validation, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for class in [ClassLabel::C0, ClassLabel::C1] {
        let ids: Vec<&String> = manifest.patients.iter().filter(|p| p.label == class).map(|p| &p.id).collect();
        let order = rng.permutation(ids.len());
        let n = ids.len();
        let mut k = (train_fraction * n as f64).round() as usize;
        if n >= 2 {
            k = k.clamp(1, n - 1);
        } else {
            k = n;
        }
        for (pos, &i) in order.iter().enumerate() {
            if pos < k {
                train.push(ids[i].clone());
            } else {
                validation.push(ids[i].clone());
            }
        }
    }
    for p in &manifest.patients {
        if p.label == ClassLabel::C2 {
            test.push(p.id.clone());
        }
    }
    train.sort();
    validation.sort();
    Split {
        run,
        seed: run_seed,
        train,
        validation,
        test,
    }
}

/// Per-channel heads combined by validation AUC.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub heads: Vec<TrainedModel>,
    pub aucs: Vec<f64>,
    pub tie: TieBreak,
    pub shape: Shape,
}

impl Classifier for Ensemble {
    fn input_shape(&self) -> Shape {
        self.shape
    }

    fn predict(&self, input: &[f64]) -> weanscope_core::Result<Vec<f64>> {
        let c = self.heads.len();
        let mut probs = Vec::with_capacity(c);
        for (k, head) in self.heads.iter().enumerate() {
            let channel: Vec<f64> = input.iter().skip(k).step_by(c).copied().collect();
            let p = head.predict(&channel)?;
            probs.push([p[0], p[1]]);
        }
        Ok(weighted_ensemble(&probs, &self.aucs, self.tie)?.probs.to_vec())
    }
}

pub enum LoadedClassifier {
    Single(TrainedModel),
    Ensemble(Ensemble),
}

impl Classifier for LoadedClassifier {
    fn input_shape(&self) -> Shape {
        match self {
            LoadedClassifier::Single(m) => m.input_shape(),
            LoadedClassifier::Ensemble(e) => e.input_shape(),
        }
    }

    fn predict(&self, input: &[f64]) -> weanscope_core::Result<Vec<f64>> {
        match self {
            LoadedClassifier::Single(m) => m.predict(input),
            LoadedClassifier::Ensemble(e) => e.predict(input),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HeadsFile {
    aucs: Vec<f64>,
    tie: TieBreak,
    channels: Vec<VariableId>,
}

/// Loads `run<k>/model.wsm` or the head ensemble in `run<k>/`.
pub fn load_classifier(run_dir: &Path) -> Result<LoadedClassifier> {
    let single = run_dir.join("model.wsm");
    if single.is_file() {
        return Ok(LoadedClassifier::Single(load_model(&single)?));
    }
    let heads_path = run_dir.join("heads.json");
    if !heads_path.is_file() {
        return Err(PipelineError::MissingUpstreamArtifact(single));
    }
    let hf: HeadsFile = io::read_json(&heads_path)?;
    let heads = (0..hf.channels.len())
        .map(|k| load_model(&run_dir.join(format!("head{k}.wsm"))))
        .collect::<Result<Vec<_>>>()?;
    let Shape::Image { h, w, .. } = heads[0].input_shape() else {
        return Err(PipelineError::format(heads_path, "head input is not an image"));
    };
    Ok(LoadedClassifier::Ensemble(Ensemble {
        shape: Shape::image(h, w, heads.len()),
        heads,
        aucs: hf.aucs,
        tie: hf.tie,
    }))
}

fn label_index(l: ClassLabel) -> usize {
    l.is_failure() as usize
}

fn load_tensors(ctx: &Ctx) -> Result<(Manifest, BTreeMap<String, ImageTensor>)> {
    let dir = ctx.upstream(Stage::Render)?;
    let manifest: Manifest = io::read_json(&dir.join(MANIFEST))?;
    let mut out = BTreeMap::new();
    for p in &manifest.patients {
        let path = dir.join("tensors").join(format!("{}.tensor", p.id));
        if !path.is_file() {
            return Err(PipelineError::MissingUpstreamArtifact(path));
        }
        out.insert(p.id.clone(), read_tensor(&path)?);
    }
    Ok((manifest, out))
}

fn examples(ids: &[String], tensors: &BTreeMap<String, ImageTensor>, channel: Option<usize>) -> Vec<Example> {
    ids.iter()
        .map(|id| {
            let t = &tensors[id];
            let input = match channel {
                Some(k) => t.data.iter().skip(k).step_by(t.c).copied().collect(),
                None => t.data.clone(),
            };
            Example {
                input,
                label: label_index(t.class_label.unwrap_or(ClassLabel::C0)),
            }
        })
        .collect()
}

fn predict_class(p: &[f64], tie: TieBreak) -> bool {
    if p[1] == p[0] {
        tie == TieBreak::Failure
    } else {
        p[1] > p[0]
    }
}

fn scores<C: Classifier + Sync>(clf: &C, set: &[Example]) -> Result<Vec<Vec<f64>>> {
    use weanscope_core::nn::Executor;
    Rayon
        .run(set.len(), |i| clf.predict(&set[i].input))
        .into_iter()
        .map(|r| r.map_err(PipelineError::from))
        .collect()
}

fn tnr<C: Classifier + Sync>(clf: &C, val: &[Example], tie: TieBreak) -> Result<f64> {
    let probs = scores(clf, val)?;
    let pred: Vec<bool> = probs.iter().map(|p| predict_class(p, tie)).collect();
    let labels: Vec<bool> = val.iter().map(|e| e.label == 1).collect();
    Ok(true_negative_rate(&pred, &labels)?)
}

fn write_history(path: &Path, h: &History) -> Result<()> {
    write_csv(
        path,
        &["epoch", "train_loss", "val_loss", "val_accuracy"],
        h.epochs.iter().map(|e| {
            vec![
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.val_loss.to_string(),
                e.val_accuracy.to_string(),
            ]
        }),
    )
}

struct HeadParams {
    filters: Vec<usize>,
    units: usize,
    train: TrainConfig,
}

/// Trains one head per channel and weights them by validation AUC.
fn train_heads(
    tensors: &BTreeMap<String, ImageTensor>,
    split: &Split,
    params: &HeadParams,
    tie: TieBreak,
    size: usize,
) -> Result<(Ensemble, Vec<History>)> {
    let spec = build_stack(Shape::image(size, size, 1), &params.filters, &[params.units], false)?;
    let mut heads = Vec::new();
    let mut aucs = Vec::new();
    let mut histories = Vec::new();
    for k in 0..VariableId::ALL.len() {
        let tr = examples(&split.train, tensors, Some(k));
        let va = examples(&split.validation, tensors, Some(k));
        let cfg = TrainConfig {
            seed: mix(params.train.seed, 100 + k as u64),
            ..params.train.clone()
        };
        let (m, h) = train_early_stop(&spec, &tr, &va, &cfg, &Rayon)?;
        let s: Vec<f64> = scores(&m, &va)?.iter().map(|p| p[1]).collect();
        let labels: Vec<bool> = va.iter().map(|e| e.label == 1).collect();
        aucs.push(roc_curve(&s, &labels)?.auc);
        heads.push(m);
        histories.push(h);
    }
    Ok((
        Ensemble {
            heads,
            aucs,
            tie,
            shape: Shape::image(size, size, VariableId::ALL.len()),
        },
        histories,
    ))
}

fn save_ensemble(dir: &StageDir, run: usize, e: &Ensemble, histories: &[History]) -> Result<()> {
    let run_dir = PathBuf::from(format!("run{run}"));
    for (k, (m, h)) in e.heads.iter().zip(histories).enumerate() {
        save_model(&dir.path(run_dir.join(format!("head{k}.wsm"))), m)?;
        write_history(&dir.path(run_dir.join(format!("head{k}_history.csv"))), h)?;
    }
    io::write_json(
        &dir.path(run_dir.join("heads.json")),
        &HeadsFile {
            aucs: e.aucs.clone(),
            tie: e.tie,
            channels: VariableId::ALL.to_vec(),
        },
    )
}

fn run_splits(ctx: &Ctx, manifest: &Manifest) -> Vec<Split> {
    (0..ctx.cfg.model.runs)
        .map(|r| split_patients(manifest, r, ctx.cfg.seed, ctx.cfg.model.train_fraction))
        .collect()
}

fn head_params(ctx: &Ctx, seed: u64) -> HeadParams {
    HeadParams {
        filters: ctx.cfg.ensemble.head_filters.clone(),
        units: ctx.cfg.ensemble.head_units,
        train: TrainConfig {
            seed,
            ..ctx.cfg.model.train.clone()
        },
    }
}

pub(super) fn train(ctx: &Ctx) -> Result<PathBuf> {
    let (manifest, tensors) = load_tensors(ctx)?;
    let dir = StageDir::begin(ctx, Stage::Train)?;
    let size = ctx.cfg.image.size;
    for split in run_splits(ctx, &manifest) {
        let run_dir = PathBuf::from(format!("run{}", split.run));
        io::write_json(&dir.path(run_dir.join("split.json")), &split)?;
        if ctx.cfg.ensemble.enabled {
            let (e, hs) = train_heads(&tensors, &split, &head_params(ctx, split.seed), ctx.cfg.ensemble.tie, size)?;
            save_ensemble(&dir, split.run, &e, &hs)?;
        } else {
            let spec = build_table4_variant(Shape::image(size, size, 8), ctx.cfg.model.conv_relu)?;
            let cfg = TrainConfig {
                seed: split.seed,
                ..ctx.cfg.model.train.clone()
            };
            let (m, h) = train_early_stop(
                &spec,
                &examples(&split.train, &tensors, None),
                &examples(&split.validation, &tensors, None),
                &cfg,
                &Rayon,
            )?;
            log::info!("run {}: best epoch {} val acc {}", split.run, h.best_epoch, h.best().val_accuracy);
            save_model(&dir.path(run_dir.join("model.wsm")), &m)?;
            write_history(&dir.path(run_dir.join("history.csv")), &h)?;
        }
    }
    dir.commit(ctx)
}

/// Builds the scratch architecture encoded by a search point.
pub fn scratch_spec(space: &SearchSpace, point: &[f64], size: usize) -> weanscope_core::Result<(ModelSpec, usize, f64)> {
    let get = |n: &str| space.get(point, n).unwrap_or(0.0);
    let convs = vec![get("filters_per_layer") as usize; get("n_conv_layers") as usize];
    let fcs = vec![get("fc_units") as usize; get("n_fc_layers") as usize];
    let spec = build_stack(Shape::image(size, size, 8), &convs, &fcs, false)?;
    Ok((spec, get("batch_size") as usize, get("learning_rate")))
}

enum Tuned {
    Single(TrainedModel, History),
    Heads(Ensemble, Vec<History>),
}

fn train_point(
    ctx: &Ctx,
    space: &SearchSpace,
    point: &[f64],
    seed: u64,
    split: &Split,
    tensors: &BTreeMap<String, ImageTensor>,
) -> Result<Tuned> {
    let size = ctx.cfg.image.size;
    let base = TrainConfig {
        seed,
        max_epochs: ctx.cfg.hpo.max_epochs,
        ..ctx.cfg.model.train.clone()
    };
    match ctx.cfg.hpo.space {
        SpaceKind::ScratchCnn => {
            let (spec, batch, lr) = scratch_spec(space, point, size)?;
            let cfg = TrainConfig {
                batch_size: batch,
                learning_rate: lr,
                ..base
            };
            let (m, h) = train_early_stop(
                &spec,
                &examples(&split.train, tensors, None),
                &examples(&split.validation, tensors, None),
                &cfg,
                &Rayon,
            )?;
            Ok(Tuned::Single(m, h))
        }
        SpaceKind::ChannelHead => {
            let get = |n: &str| space.get(point, n).unwrap_or(0.0);
            let params = HeadParams {
                filters: ctx.cfg.ensemble.head_filters.clone(),
                units: get("fc_units") as usize,
                train: TrainConfig {
                    learning_rate: get("learning_rate"),
                    optimizer: if get("optimizer") == 1.0 { OptimizerKind::Sgd } else { OptimizerKind::Adam },
                    ..base
                },
            };
            let (e, hs) = train_heads(tensors, split, &params, ctx.cfg.ensemble.tie, size)?;
            Ok(Tuned::Heads(e, hs))
        }
    }
}

fn tuned_tnr(t: &Tuned, val: &[Example], tie: TieBreak) -> Result<(f64, usize)> {
    match t {
        Tuned::Single(m, h) => Ok((tnr(m, val, tie)?, h.epochs.len())),
        Tuned::Heads(e, hs) => Ok((tnr(e, val, tie)?, hs.iter().map(|h| h.epochs.len()).max().unwrap_or(0))),
    }
}

fn save_tuned(dir: &StageDir, run: usize, t: &Tuned) -> Result<()> {
    let run_dir = PathBuf::from(format!("run{run}"));
    match t {
        Tuned::Single(m, h) => {
            save_model(&dir.path(run_dir.join("model.wsm")), m)?;
            write_history(&dir.path(run_dir.join("history.csv")), h)
        }
        Tuned::Heads(e, hs) => save_ensemble(dir, run, e, hs),
    }
}

pub(super) fn tune(ctx: &Ctx) -> Result<PathBuf> {
    let (manifest, tensors) = load_tensors(ctx)?;
    let dir = StageDir::begin(ctx, Stage::Tune)?;
    let space = SearchSpace::define(ctx.cfg.hpo.space);
    let splits = run_splits(ctx, &manifest);
    let split0 = &splits[0];
    let val0 = examples(&split0.validation, &tensors, None);
    let tie = ctx.cfg.ensemble.tie;

    let mut best: Option<(f64, Tuned)> = None;
    let (best_trial, trials) = bo_run(
        |point, seed| -> Result<Evaluation> {
            let start = Instant::now();
            let t = train_point(ctx, &space, point, seed, split0, &tensors).inspect_err(|e| log::warn!("trial failed: {e}"))?;
            let (objective, epochs) = tuned_tnr(&t, &val0, tie)?;
            log::info!("trial point {} tnr {objective}", point_json(&space, point));
            if best.as_ref().is_none_or(|(b, _)| objective > *b) {
                best = Some((objective, t));
            }
            Ok(Evaluation {
                objective,
                epochs,
                seconds: start.elapsed().as_secs_f64(),
            })
        },
        &space,
        ctx.cfg.hpo.budget,
        ctx.cfg.seed,
        &ctx.cfg.hpo.bo,
    )?;
    write_trial_log(&dir.path("trials.csv"), &space, &trials)?;
    io::write_json(
        &dir.path("best.json"),
        &serde_json::json!({
            "trial": best_trial.trial,
            "config": point_json(&space, &best_trial.point),
            "objective_tnr": best_trial.objective,
            "seed": best_trial.seed,
            "failed": best_trial.failed,
        }),
    )?;
    for split in &splits {
        io::write_json(&dir.path(PathBuf::from(format!("run{}", split.run)).join("split.json")), split)?;
        if split.run == 0 {
            match &best {
                Some((_, t)) if !best_trial.failed => save_tuned(&dir, 0, t)?,
                _ => return Err(PipelineError::Core(weanscope_core::Error::InvalidParameters(
                    "every tuning trial failed".into(),
                ))),
            }
        } else {
            let t = train_point(ctx, &space, &best_trial.point, mix(best_trial.seed, split.run as u64), split, &tensors)?;
            save_tuned(&dir, split.run, &t)?;
        }
    }
    dir.commit(ctx)
}

struct RunOutcome {
    validation: MetricSet,
    test: Option<MetricSet>,
    auc: Option<f64>,
    predictions: Vec<Vec<String>>,
}

fn evaluate_run(
    run_dir: &Path,
    split: &Split,
    tensors: &BTreeMap<String, ImageTensor>,
    tie: TieBreak,
) -> Result<RunOutcome> {
    let clf = load_classifier(run_dir)?;
    let mut predictions = Vec::new();
    let mut score_set = |ids: &[String], name: &str| -> Result<(Vec<bool>, Vec<bool>, Vec<f64>)> {
        let set = examples(ids, tensors, None);
        let probs = scores(&clf, &set)?;
        let mut pred = Vec::new();
        let mut lab = Vec::new();
        let mut s = Vec::new();
        for ((id, ex), p) in ids.iter().zip(&set).zip(&probs) {
            let c = predict_class(p, tie);
            predictions.push(vec![
                split.run.to_string(),
                name.to_string(),
                id.clone(),
                tensors[id].class_label.map(|l| l.to_string()).unwrap_or_default(),
                p[0].to_string(),
                p[1].to_string(),
                if c { "C1".into() } else { "C0".into() },
            ]);
            pred.push(c);
            lab.push(ex.label == 1);
            s.push(p[1]);
        }
        Ok((pred, lab, s))
    };
    let (vp, vl, vs) = score_set(&split.validation, "validation")?;
    let (tp, tl, _) = score_set(&split.test, "test")?;
    let validation = classification_metrics(&vp, &vl)?;
    let test = if tp.is_empty() { None } else { Some(classification_metrics(&tp, &tl)?) };
    let auc = roc_curve(&vs, &vl).ok().map(|r| r.auc);
    Ok(RunOutcome {
        validation,
        test,
        auc,
        predictions,
    })
}

pub(super) fn eval(ctx: &Ctx) -> Result<PathBuf> {
    let model_dir = ctx.model_dir()?;
    let (_, tensors) = load_tensors(ctx)?;
    let dir = StageDir::begin(ctx, Stage::Eval)?;
    let tie = ctx.cfg.ensemble.tie;
    let mut val_rows = Vec::new();
    let mut test_rows = Vec::new();
    let mut aucs = Vec::new();
    let mut predictions = Vec::new();
    for r in 0..ctx.cfg.model.runs {
        let run_dir = model_dir.join(format!("run{r}"));
        let split: Split = io::read_json(&run_dir.join("split.json"))?;
        let out = evaluate_run(&run_dir, &split, &tensors, tie)?;
        val_rows.push((r.to_string(), out.validation));
        if let Some(t) = out.test {
            test_rows.push((r.to_string(), t));
        }
        aucs.push(vec![r.to_string(), out.auc.map(|a| a.to_string()).unwrap_or_default()]);
        predictions.extend(out.predictions);
    }
    write_metrics(&dir.path("metrics.csv"), &val_rows)?;
    if !test_rows.is_empty() {
        write_metrics(&dir.path("test_metrics.csv"), &test_rows)?;
    }
    write_csv(&dir.path("auc.csv"), &["run_id", "auc"], aucs)?;
    write_csv(
        &dir.path("predictions.csv"),
        &["run_id", "split", "patient_id", "class_label", "p_success", "p_failure", "predicted"],
        predictions,
    )?;
    let mut summary = Vec::new();
    for (name, rows) in [("validation", &val_rows), ("test", &test_rows)] {
        if rows.is_empty() {
            continue;
        }
        let metrics: [(&str, fn(&MetricSet) -> f64); 4] = [
            ("accuracy", |m| m.accuracy),
            ("recall", |m| m.recall),
            ("precision", |m| m.precision),
            ("f1", |m| m.f1),
        ];
        for (metric, f) in metrics {
            let values: Vec<f64> = rows.iter().map(|(_, m)| f(m)).collect();
            let a = run_aggregate(&values)?;
            summary.push(vec![
                name.to_string(),
                metric.to_string(),
                a.mean.to_string(),
                a.std.to_string(),
                a.n.to_string(),
            ]);
        }
    }
    write_csv(&dir.path("summary.csv"), &["split", "metric", "mean", "std", "n"], summary)?;
    dir.commit(ctx)
}

pub(super) fn occlude(ctx: &Ctx) -> Result<PathBuf> {
    let model_dir = ctx.model_dir()?;
    let (_, tensors) = load_tensors(ctx)?;
    let run_dir = model_dir.join("run0");
    let split: Split = io::read_json(&run_dir.join("split.json"))?;
    let clf = load_classifier(&run_dir)?;
    let dir = StageDir::begin(ctx, Stage::Occlude)?;
    let mut ids: Vec<String> = split.validation.iter().chain(&split.test).cloned().collect();
    if let Some(k) = ctx.cfg.occlusion.max_patients {
        ids.truncate(k);
    }
    let opts = ctx.cfg.occlusion.options;
    let mut summary = Vec::new();
    for id in &ids {
        let t = &tensors[id];
        let map = occlusion_map(&clf, t, &opts, &Rayon)?;
        for (k, v) in t.channel_order.iter().enumerate() {
            let grid = &map.channels[k];
            let rel = PathBuf::from(id).join(v.as_str());
            crate::io::tables::write_matrix(&dir.path(rel.with_extension("csv")), map.grid_h, map.grid_w, grid)?;
            let plane = Plane {
                h: map.grid_h,
                w: map.grid_w,
                data: grid.clone(),
            };
            let heat = image::normalize(&resize_bilinear(&plane, t.h, t.w));
            image::write_png(&dir.path(rel.with_extension("png")), &heat)?;
            let (mut best, mut gy, mut gx) = (0.0f64, 0, 0);
            for (i, s) in grid.iter().enumerate() {
                if s.abs() > best {
                    best = s.abs();
                    gy = i / map.grid_w;
                    gx = i % map.grid_w;
                }
            }
            summary.push(vec![
                id.clone(),
                v.to_string(),
                map.baseline_score.to_string(),
                best.to_string(),
                gy.to_string(),
                gx.to_string(),
            ]);
        }
        io::write_json(
            &dir.path(PathBuf::from(id).join("map.json")),
            &serde_json::json!({
                "patient_id": id,
                "grid_h": map.grid_h,
                "grid_w": map.grid_w,
                "window": map.window,
                "stride": map.stride,
                "target_class": map.target_class,
                "baseline_score": map.baseline_score,
                "forward_passes": map.forward_passes,
            }),
        )?;
    }
    write_csv(
        &dir.path("summary.csv"),
        &["patient_id", "variable", "baseline_score", "max_abs_sensitivity", "grid_y", "grid_x"],
        summary,
    )?;
    dir.commit(ctx)
}
