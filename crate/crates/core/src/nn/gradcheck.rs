use alloc::vec;
use alloc::vec::Vec;

use super::layers::Mode;
use super::model::Network;
use crate::error::Result;
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub h: f64,
    /// Entries checked per weight or bias tensor; `None` checks all.
    pub max_per_tensor: Option<usize>,
    /// Denominator floor for the relative error.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            h: 1e-5,
            max_per_tensor: Some(64),
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: usize,
    pub n_checked: usize,
}

/// Compares analytic gradients of the single-example loss against central
/// differences. Dropout runs in eval mode.
pub fn grad_check(net: &Network, input: &[f64], label: usize, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let mut rng = SeededRng::new(opts.seed);
    let mut analytic = vec![0.0; net.params.len()];
    net.loss_and_grad(input, label, Mode::Eval, &mut rng, &mut analytic)?;

    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: 0,
        n_checked: 0,
    };
    for slot in net.slots() {
        for range in [slot.weight_range(), slot.bias_range()] {
            if range.is_empty() {
                continue;
            }
            let idx: Vec<usize> = match opts.max_per_tensor {
                Some(k) if k < range.len() => {
                    let mut all: Vec<usize> = range.clone().collect();
                    rng.shuffle(&mut all);
                    all.truncate(k);
                    all
                }
                _ => range.clone().collect(),
            };
            for i in idx {
                let orig = probe.params[i];
                probe.params[i] = orig + opts.h;
                let up = probe.loss(input, label)?;
                probe.params[i] = orig - opts.h;
                let down = probe.loss(input, label)?;
                probe.params[i] = orig;
                let numeric = (up - down) / (2.0 * opts.h);
                let a = analytic[i];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
                report.n_checked += 1;
                if err > report.max_rel_err {
                    report.max_rel_err = err;
                    report.worst_param = i;
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{build_table4, LayerSpec, ModelSpec, Shape};

    #[test]
    fn dense_softmax_exact() {
        let spec = ModelSpec::new(Shape::Vector(5), vec![LayerSpec::Softmax { classes: 3 }]).unwrap();
        let mut rng = SeededRng::new(4);
        let net = Network::init(&spec, &mut rng).unwrap();
        let x: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
        let opts = GradCheckOptions {
            max_per_tensor: None,
            ..Default::default()
        };
        let r = grad_check(&net, &x, 2, &opts).unwrap();
        assert_eq!(r.n_checked, 18);
        assert!(r.max_rel_err < 1e-6, "{r:?}");
    }

    #[test]
    fn zero_input_conv_checks_biases() {
        let spec = ModelSpec::new(
            Shape::image(5, 5, 1),
            vec![
                LayerSpec::Conv2d { filters: 2 },
                LayerSpec::Flatten,
                LayerSpec::Softmax { classes: 2 },
            ],
        )
        .unwrap();
        let mut rng = SeededRng::new(5);
        let net = Network::init(&spec, &mut rng).unwrap();
        let x = vec![0.0; 25];
        let mut g = vec![0.0; net.params.len()];
        net.loss_and_grad(&x, 0, Mode::Eval, &mut rng, &mut g).unwrap();
        let conv = net.slots()[0];
        assert!(g[conv.weight_range()].iter().all(|&v| v == 0.0));
        assert!(g[conv.bias_range()].iter().any(|&v| v != 0.0));
        let opts = GradCheckOptions {
            max_per_tensor: None,
            ..Default::default()
        };
        assert!(grad_check(&net, &x, 0, &opts).unwrap().max_rel_err < 1e-6);
    }

    #[test]
    fn reduced_table4() {
        let spec = build_table4(Shape::image(12, 12, 2)).unwrap();
        let mut rng = SeededRng::new(11);
        let net = Network::init(&spec, &mut rng).unwrap();
        let x: Vec<f64> = (0..12 * 12 * 2).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let r = grad_check(&net, &x, 1, &GradCheckOptions::default()).unwrap();
        assert!(r.max_rel_err < 1e-4, "{r:?}");
    }
}
