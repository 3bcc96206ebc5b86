use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::layers::Mode;
use super::model::{Classifier, ModelSpec, Network, Shape};
use super::optim::{Optimizer, OptimizerKind};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Examples per gradient chunk. Chunks are summed in index order, so the
/// result does not depend on how many workers evaluate them.
pub const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 6.3e-4,
            batch_size: 32,
            optimizer: OptimizerKind::Adam,
            max_epochs: 30,
            patience: 10,
            min_delta: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameters("learning rate must be positive".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidParameters("batch size and max epochs must be positive".into()));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::InvalidParameters("min_delta must be non-negative".into()));
        }
        Ok(())
    }
}

/// Flat channel-last input with a class index (0 = success, 1 = failure).
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl History {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }
}

/// Runs `n` independent jobs and returns their results in index order.
pub trait Executor {
    /// Jobs worth running at once; bounds how many gradient buffers are live.
    fn width(&self) -> usize {
        1
    }

    fn run<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

pub struct Sequential;

impl Executor for Sequential {
    fn run<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub network: Network,
    pub config: TrainConfig,
    /// Epoch (1-based) whose parameters were kept.
    pub epoch: usize,
}

impl Classifier for TrainedModel {
    fn input_shape(&self) -> Shape {
        self.network.input_shape()
    }

    fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.network.predict(input)
    }
}

/// Mean loss and accuracy on `set` in eval mode.
pub fn evaluate<E: Executor>(net: &Network, set: &[Example], exec: &E) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let results = exec.run(set.len(), |i| {
        let ex = &set[i];
        net.predict(&ex.input).map(|p| {
            let loss = -libm::log(p[ex.label.min(p.len() - 1)].max(f64::MIN_POSITIVE));
            let pred = argmax(&p);
            (loss, pred == ex.label)
        })
    });
    let mut loss = 0.0;
    let mut correct = 0usize;
    for r in results {
        let (l, ok) = r?;
        loss += l;
        correct += ok as usize;
    }
    Ok((loss / set.len() as f64, correct as f64 / set.len() as f64))
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Mean gradient over `batch` (indices into `set`), dropout in train mode.
fn batch_gradient<E: Executor>(
    net: &Network,
    set: &[Example],
    batch: &[usize],
    batch_seed: u64,
    exec: &E,
) -> Result<(f64, Vec<f64>)> {
    let n_params = net.params.len();
    let chunks: Vec<&[usize]> = batch.chunks(GRAD_CHUNK).collect();
    let mut total = vec![0.0; n_params];
    let mut loss = 0.0;
    // chunk sums are added in chunk order whatever the grouping
    for group in (0..chunks.len()).collect::<Vec<_>>().chunks(exec.width().max(1)) {
        let partial = exec.run(group.len(), |j| -> Result<(f64, Vec<f64>)> {
            let c = group[j];
            let mut grads = vec![0.0; n_params];
            let mut loss = 0.0;
            for (k, &idx) in chunks[c].iter().enumerate() {
                let mut rng = SeededRng::derive(batch_seed, (c * GRAD_CHUNK + k) as u64);
                let ex = &set[idx];
                let (l, _) = net.loss_and_grad(&ex.input, ex.label, Mode::Train, &mut rng, &mut grads)?;
                loss += l;
            }
            Ok((loss, grads))
        });
        for p in partial {
            let (l, g) = p?;
            loss += l;
            for (t, v) in total.iter_mut().zip(&g) {
                *t += v;
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for t in &mut total {
        *t *= scale;
    }
    Ok((loss * scale, total))
}

fn check_sets(spec: &ModelSpec, train: &[Example], val: &[Example]) -> Result<()> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = spec.classes();
    for ex in train.iter().chain(val) {
        if ex.input.len() != spec.input.len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "example with {} values for input {}",
                ex.input.len(),
                spec.input
            )));
        }
        if ex.label >= classes {
            return Err(Error::InvalidLabel(alloc::format!("label {}", ex.label)));
        }
    }
    Ok(())
}

/// He-initializes `spec` from `cfg.seed` and trains with early stopping.
pub fn train_early_stop<E: Executor>(
    spec: &ModelSpec,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
    exec: &E,
) -> Result<(TrainedModel, History)> {
    cfg.validate()?;
    check_sets(spec, train, val)?;
    let mut rng = SeededRng::new(cfg.seed);
    let net = Network::init(spec, &mut rng)?;
    run(net, train, val, cfg, &mut rng, exec)
}

/// Trains from existing parameters; the shuffling stream is seeded by
/// `cfg.seed`.
pub fn train_from<E: Executor>(
    net: Network,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
    exec: &E,
) -> Result<(TrainedModel, History)> {
    cfg.validate()?;
    check_sets(&net.spec, train, val)?;
    let mut rng = SeededRng::new(cfg.seed);
    run(net, train, val, cfg, &mut rng, exec)
}

fn run<E: Executor>(
    mut net: Network,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
    rng: &mut SeededRng,
    exec: &E,
) -> Result<(TrainedModel, History)> {
    let mut opt = Optimizer::new(cfg.optimizer, net.params.len());
    let mut best_params = net.params.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let order = rng.permutation(train.len());
        let mut train_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let batch_seed = rng.next_u64();
            let (loss, grads) = batch_gradient(&net, train, batch, batch_seed, exec)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            opt.step(&mut net.params, &grads, cfg.learning_rate)?;
            train_loss += loss * batch.len() as f64;
        }
        train_loss /= train.len() as f64;
        let (val_loss, val_accuracy) = evaluate(&net, val, exec)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        log::debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:.5} acc {val_accuracy:.3}");
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });
        if val_loss < best_loss - cfg.min_delta || best_epoch == 0 {
            best_loss = val_loss;
            best_epoch = epoch;
            best_params.copy_from_slice(&net.params);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
    }
    net.params = best_params;
    Ok((
        TrainedModel {
            network: net,
            config: cfg.clone(),
            epoch: best_epoch,
        },
        History {
            epochs,
            best_epoch,
            stopped_early,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{build_stack, LayerSpec};

    fn fixture(n: usize, seed: u64) -> Vec<Example> {
        // two blobs in 4-d, separable along the first axis
        let mut rng = SeededRng::new(seed);
        (0..n)
            .map(|i| {
                let label = i % 2;
                let centre = if label == 1 { 1.5 } else { -1.5 };
                let input = (0..4).map(|d| if d == 0 { centre } else { 0.0 } + 0.3 * rng.normal()).collect();
                Example { input, label }
            })
            .collect()
    }

    fn small_spec() -> ModelSpec {
        ModelSpec::new(
            Shape::Vector(4),
            vec![
                LayerSpec::Dense { units: 8 },
                LayerSpec::Relu,
                LayerSpec::Softmax { classes: 2 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn deterministic_histories() {
        let (tr, va) = (fixture(40, 1), fixture(20, 2));
        let cfg = TrainConfig {
            seed: 9,
            max_epochs: 5,
            batch_size: 7,
            ..TrainConfig::default()
        };
        let (m1, h1) = train_early_stop(&small_spec(), &tr, &va, &cfg, &Sequential).unwrap();
        let (m2, h2) = train_early_stop(&small_spec(), &tr, &va, &cfg, &Sequential).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(m1.network.params, m2.network.params);
    }

    #[test]
    fn learns_separable_blobs() {
        let (tr, va) = (fixture(60, 3), fixture(30, 4));
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 10,
            ..TrainConfig::default()
        };
        let (m, h) = train_early_stop(&small_spec(), &tr, &va, &cfg, &Sequential).unwrap();
        assert!(h.best().val_accuracy >= 0.95);
        let (_, acc) = evaluate(&m.network, &va, &Sequential).unwrap();
        assert_eq!(acc, h.best().val_accuracy);
    }

    #[test]
    fn sgd_loss_decreases_on_fixed_batch() {
        let set = fixture(16, 5);
        let mut rng = SeededRng::new(2);
        let mut net = Network::init(&small_spec(), &mut rng).unwrap();
        let batch: Vec<usize> = (0..set.len()).collect();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, net.params.len());
        let mut prev = f64::INFINITY;
        for _ in 0..5 {
            let (loss, g) = batch_gradient(&net, &set, &batch, 0, &Sequential).unwrap();
            assert!(loss < prev);
            prev = loss;
            opt.step(&mut net.params, &g, 1e-2).unwrap();
        }
    }

    #[test]
    fn early_stop_restores_best() {
        let (tr, va) = (fixture(20, 6), fixture(10, 7));
        let cfg = TrainConfig {
            learning_rate: 0.5,
            optimizer: OptimizerKind::Sgd,
            max_epochs: 60,
            patience: 3,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let (m, h) = train_early_stop(&small_spec(), &tr, &va, &cfg, &Sequential).unwrap();
        let (vl, _) = evaluate(&m.network, &va, &Sequential).unwrap();
        assert_eq!(vl, h.best().val_loss);
        assert_eq!(m.epoch, h.best_epoch);
        let min = h.epochs.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
        assert!(h.best().val_loss <= min + cfg.min_delta);
        if h.stopped_early {
            assert_eq!(h.epochs.len(), h.best_epoch + cfg.patience);
        }
    }

    #[test]
    fn empty_and_bad_sets() {
        let cfg = TrainConfig::default();
        assert_eq!(
            train_early_stop(&small_spec(), &[], &fixture(2, 1), &cfg, &Sequential).unwrap_err(),
            Error::EmptyDataset
        );
        let mut bad = fixture(2, 1);
        bad[0].label = 2;
        assert!(train_early_stop(&small_spec(), &bad, &fixture(2, 1), &cfg, &Sequential).is_err());
    }

    #[test]
    fn diverging_run_reports_non_finite() {
        let (tr, va) = (fixture(8, 1), fixture(4, 2));
        let spec = build_stack(Shape::image(6, 6, 1), &[2], &[4], false).unwrap();
        let tr: Vec<Example> = tr
            .iter()
            .map(|e| Example {
                input: vec![1e200; 36],
                label: e.label,
            })
            .collect();
        let va: Vec<Example> = va
            .iter()
            .map(|e| Example {
                input: vec![1e200; 36],
                label: e.label,
            })
            .collect();
        let cfg = TrainConfig {
            optimizer: OptimizerKind::Sgd,
            learning_rate: 1e10,
            ..TrainConfig::default()
        };
        let err = train_early_stop(&spec, &tr, &va, &cfg, &Sequential).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }));
    }
}
