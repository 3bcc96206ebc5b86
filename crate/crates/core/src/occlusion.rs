//! Occlusion sensitivity: mask one window of one channel at a time and
//! record the drop in the target class score.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ImageTensor;
use crate::nn::{Classifier, Executor, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Fill {
    #[default]
    ChannelMean,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcclusionOptions {
    pub window: usize,
    pub stride: usize,
    pub fill: Fill,
    pub target_class: usize,
}

impl Default for OcclusionOptions {
    fn default() -> Self {
        Self {
            window: 40,
            stride: 20,
            fill: Fill::ChannelMean,
            target_class: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionMap {
    pub grid_h: usize,
    pub grid_w: usize,
    /// One row-major `grid_h x grid_w` grid per channel.
    pub channels: Vec<Vec<f64>>,
    pub window: usize,
    pub stride: usize,
    pub target_class: usize,
    pub baseline_score: f64,
    pub forward_passes: usize,
}

impl OcclusionMap {
    pub fn at(&self, ch: usize, gy: usize, gx: usize) -> f64 {
        self.channels[ch][gy * self.grid_w + gx]
    }

    /// `(channel, gy, gx)` of the largest absolute sensitivity; first wins.
    pub fn argmax_abs(&self) -> (usize, usize, usize) {
        let mut best = (0, 0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for (c, grid) in self.channels.iter().enumerate() {
            for (i, v) in grid.iter().enumerate() {
                if v.abs() > best_v {
                    best_v = v.abs();
                    best = (c, i / self.grid_w, i % self.grid_w);
                }
            }
        }
        best
    }
}

pub fn grid_dim(size: usize, window: usize, stride: usize) -> usize {
    (size - window) / stride + 1
}

/// Input with the window at grid cell `(gy, gx)` of channel `ch` filled.
pub fn occlude(x: &ImageTensor, ch: usize, gy: usize, gx: usize, opts: &OcclusionOptions) -> Vec<f64> {
    let fill = match opts.fill {
        Fill::ChannelMean => x.channel_mean(ch),
        Fill::Zero => 0.0,
    };
    let mut data = x.data.clone();
    let (y0, x0) = (gy * opts.stride, gx * opts.stride);
    for y in y0..y0 + opts.window {
        for xx in x0..x0 + opts.window {
            data[(y * x.w + xx) * x.c + ch] = fill;
        }
    }
    data
}

pub fn occlusion_map<M, E>(model: &M, x: &ImageTensor, opts: &OcclusionOptions, exec: &E) -> Result<OcclusionMap>
where
    M: Classifier + Sync,
    E: Executor,
{
    if opts.stride == 0 || opts.window == 0 {
        return Err(Error::InvalidParameters("window and stride must be positive".into()));
    }
    if opts.window > x.h || opts.window > x.w {
        return Err(Error::WindowTooLarge {
            window: opts.window,
            h: x.h,
            w: x.w,
        });
    }
    let expected = Shape::image(x.h, x.w, x.c);
    if model.input_shape() != expected {
        return Err(Error::ShapeMismatch(alloc::format!(
            "model expects {}, image is {expected}",
            model.input_shape()
        )));
    }
    let score = |input: &[f64]| -> Result<f64> {
        let p = model.predict(input)?;
        p.get(opts.target_class)
            .copied()
            .ok_or_else(|| Error::InvalidLabel(alloc::format!("target class {}", opts.target_class)))
    };
    let baseline = score(&x.data)?;
    let (gh, gw) = (grid_dim(x.h, opts.window, opts.stride), grid_dim(x.w, opts.window, opts.stride));
    let cells = gh * gw;
    let results = exec.run(x.c * cells, |k| {
        let (ch, cell) = (k / cells, k % cells);
        let input = occlude(x, ch, cell / gw, cell % gw, opts);
        score(&input).map(|s| baseline - s)
    });
    let mut channels = alloc::vec![Vec::with_capacity(cells); x.c];
    for (k, r) in results.into_iter().enumerate() {
        channels[k / cells].push(r?);
    }
    Ok(OcclusionMap {
        grid_h: gh,
        grid_w: gw,
        channels,
        window: opts.window,
        stride: opts.stride,
        target_class: opts.target_class,
        baseline_score: baseline,
        forward_passes: x.c * cells + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Sequential;
    use alloc::string::String;
    use alloc::vec;
    use core::sync::atomic::{AtomicUsize, Ordering};

    struct Counting<F> {
        shape: Shape,
        f: F,
        calls: AtomicUsize,
    }

    impl<F: Fn(&[f64]) -> f64> Classifier for Counting<F> {
        fn input_shape(&self) -> Shape {
            self.shape
        }
        fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            let p = 1.0 / (1.0 + libm::exp(-(self.f)(input)));
            Ok(vec![1.0 - p, p])
        }
    }

    fn image(h: usize, w: usize, c: usize, seed: u64) -> ImageTensor {
        let mut rng = crate::rng::SeededRng::new(seed);
        ImageTensor {
            h,
            w,
            c,
            data: (0..h * w * c).map(|_| rng.uniform()).collect(),
            channel_order: crate::series::VariableId::ALL[..c].to_vec(),
            patient_id: String::from("p"),
            class_label: None,
        }
    }

    #[test]
    fn defaults_give_ten_by_ten() {
        let x = image(224, 224, 8, 1);
        let m = Counting {
            shape: Shape::image(224, 224, 8),
            f: |_: &[f64]| 0.3,
            calls: AtomicUsize::new(0),
        };
        let map = occlusion_map(&m, &x, &OcclusionOptions::default(), &Sequential).unwrap();
        assert_eq!((map.grid_h, map.grid_w), (10, 10));
        assert_eq!(map.channels.len(), 8);
        assert!(map.channels.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(map.forward_passes, 8 * 100 + 1);
        assert_eq!(m.calls.load(Ordering::Relaxed), 801);
    }

    #[test]
    fn localized_model_matches_brute_force() {
        let (h, w, c) = (224, 224, 8);
        let x = image(h, w, c, 2);
        let f = move |v: &[f64]| {
            let mut s = 0.0;
            for y in 60..80 {
                for xx in 60..80 {
                    s += v[(y * w + xx) * c + 3];
                }
            }
            (s - 200.0) / 50.0
        };
        let m = Counting {
            shape: Shape::image(h, w, c),
            f,
            calls: AtomicUsize::new(0),
        };
        let mut opts = OcclusionOptions::default();
        opts.fill = Fill::Zero;
        let map = occlusion_map(&m, &x, &opts, &Sequential).unwrap();
        let (ch, _, _) = map.argmax_abs();
        assert_eq!(ch, 3);
        let base = m.predict(&x.data).unwrap()[1];
        for ch in 0..c {
            for gy in 0..10 {
                for gx in 0..10 {
                    let occluded = m.predict(&occlude(&x, ch, gy, gx, &opts)).unwrap()[1];
                    assert_eq!(map.at(ch, gy, gx), base - occluded);
                    let (y0, x0) = (gy * 20, gx * 20);
                    let covers = ch == 3 && y0 < 80 && y0 + 40 > 60 && x0 < 80 && x0 + 40 > 60;
                    assert_eq!(map.at(ch, gy, gx) != 0.0, covers);
                }
            }
        }
    }

    #[test]
    fn flat_window_is_zero() {
        let mut x = image(8, 8, 1, 3);
        let mean = x.channel_mean(0);
        for v in &mut x.data {
            *v = mean;
        }
        let m = Counting {
            shape: Shape::image(8, 8, 1),
            f: |v: &[f64]| v.iter().sum::<f64>(),
            calls: AtomicUsize::new(0),
        };
        let opts = OcclusionOptions {
            window: 4,
            stride: 2,
            ..Default::default()
        };
        let map = occlusion_map(&m, &x, &opts, &Sequential).unwrap();
        assert!(map.channels[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn errors() {
        let x = image(8, 8, 1, 4);
        let m = Counting {
            shape: Shape::image(8, 8, 1),
            f: |_: &[f64]| 0.0,
            calls: AtomicUsize::new(0),
        };
        assert!(matches!(
            occlusion_map(&m, &x, &OcclusionOptions::default(), &Sequential),
            Err(Error::WindowTooLarge { .. })
        ));
        let y = image(10, 10, 1, 4);
        let opts = OcclusionOptions {
            window: 4,
            stride: 2,
            ..Default::default()
        };
        assert!(matches!(occlusion_map(&m, &y, &opts, &Sequential), Err(Error::ShapeMismatch(_))));
    }
}
