//! PSD maps to fixed-size image planes and the channel-stacked CNN input.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cwt::PsdMap;
use crate::error::{Error, Result};
use crate::series::{ClassLabel, VariableId};

/// Single-channel image, row-major, values in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::ShapeMismatch(alloc::format!("{} values for {h}x{w}", data.len())));
        }
        Ok(Self { h, w, data })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self {
            h,
            w,
            data: alloc::vec![0.0; h * w],
        }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.w + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderOptions {
    pub out_h: usize,
    pub out_w: usize,
    /// Apply `ln(1 + p)` before min-max scaling.
    pub log_compress: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            out_h: 224,
            out_w: 224,
            log_compress: true,
        }
    }
}

/// Min-max normalizes (optionally log-compressed) power and resizes it
/// bilinearly. Rows keep the scalogram order, so the highest pseudo-frequency
/// is at the top and time runs left to right. Flat maps render as zeros.
pub fn render_plane(p: &PsdMap, opts: &RenderOptions) -> Result<Plane> {
    if p.power.is_empty() || p.rows == 0 || p.cols == 0 {
        return Err(Error::EmptyMap);
    }
    if opts.out_h == 0 || opts.out_w == 0 {
        return Err(Error::InvalidParameters("output size must be positive".into()));
    }
    let vals: Vec<f64> = if opts.log_compress {
        p.power.iter().map(|&v| libm::log1p(v)).collect()
    } else {
        p.power.clone()
    };
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm: Vec<f64> = if hi > lo {
        vals.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        alloc::vec![0.0; vals.len()]
    };
    let src = Plane {
        h: p.rows,
        w: p.cols,
        data: norm,
    };
    Ok(resize_bilinear(&src, opts.out_h, opts.out_w))
}

/// Corner-aligned bilinear resize: output corners sample input corners.
pub fn resize_bilinear(src: &Plane, out_h: usize, out_w: usize) -> Plane {
    if src.h == out_h && src.w == out_w {
        return src.clone();
    }
    let coord = |i: usize, n_out: usize, n_in: usize| -> (usize, usize, f64) {
        if n_out <= 1 || n_in <= 1 {
            return (0, 0, 0.0);
        }
        let x = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
        let x0 = (libm::floor(x) as usize).min(n_in - 1);
        let x1 = (x0 + 1).min(n_in - 1);
        (x0, x1, x - x0 as f64)
    };
    let cols: Vec<(usize, usize, f64)> = (0..out_w).map(|j| coord(j, out_w, src.w)).collect();
    let mut data = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let (r0, r1, fy) = coord(i, out_h, src.h);
        for &(c0, c1, fx) in &cols {
            let top = src.at(r0, c0) * (1.0 - fx) + src.at(r0, c1) * fx;
            let bot = src.at(r1, c0) * (1.0 - fx) + src.at(r1, c1) * fx;
            data.push((top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0));
        }
    }
    Plane { h: out_h, w: out_w, data }
}

/// `h x w x c` image, channel-last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
    pub channel_order: Vec<VariableId>,
    pub patient_id: String,
    pub class_label: Option<ClassLabel>,
}

impl ImageTensor {
    pub fn at(&self, y: usize, x: usize, ch: usize) -> f64 {
        self.data[(y * self.w + x) * self.c + ch]
    }

    pub fn channel(&self, ch: usize) -> Plane {
        Plane {
            h: self.h,
            w: self.w,
            data: self.data.iter().skip(ch).step_by(self.c).copied().collect(),
        }
    }

    pub fn channel_mean(&self, ch: usize) -> f64 {
        self.data.iter().skip(ch).step_by(self.c).sum::<f64>() / (self.h * self.w) as f64
    }

    /// Copy holding only channel `ch`, as input for a per-channel classifier.
    pub fn single_channel(&self, ch: usize) -> ImageTensor {
        ImageTensor {
            h: self.h,
            w: self.w,
            c: 1,
            data: self.channel(ch).data,
            channel_order: alloc::vec![self.channel_order[ch]],
            patient_id: self.patient_id.clone(),
            class_label: self.class_label,
        }
    }
}

/// Stacks the eight planes in canonical variable order.
pub fn stack_tensor(planes: &[Plane], patient_id: &str, class_label: Option<ClassLabel>) -> Result<ImageTensor> {
    if planes.len() != VariableId::ALL.len() {
        return Err(Error::ChannelCountMismatch {
            expected: VariableId::ALL.len(),
            got: planes.len(),
        });
    }
    stack_channels(planes, VariableId::ALL.to_vec(), patient_id, class_label)
}

/// Stacks any number of equal-sized planes.
pub fn stack_channels(
    planes: &[Plane],
    channel_order: Vec<VariableId>,
    patient_id: &str,
    class_label: Option<ClassLabel>,
) -> Result<ImageTensor> {
    let first = planes.first().ok_or(Error::ChannelCountMismatch { expected: 1, got: 0 })?;
    if channel_order.len() != planes.len() {
        return Err(Error::ChannelCountMismatch {
            expected: channel_order.len(),
            got: planes.len(),
        });
    }
    let (h, w, c) = (first.h, first.w, planes.len());
    if let Some(p) = planes.iter().find(|p| p.h != h || p.w != w) {
        return Err(Error::ShapeMismatch(alloc::format!("plane {}x{} vs {h}x{w}", p.h, p.w)));
    }
    let mut data = Vec::with_capacity(h * w * c);
    for i in 0..h * w {
        for p in planes {
            data.push(p.data[i]);
        }
    }
    Ok(ImageTensor {
        h,
        w,
        c,
        data,
        channel_order,
        patient_id: patient_id.into(),
        class_label,
    })
}

/// `round(v * 255)` with halves rounded up.
pub fn quantize(v: f64) -> u8 {
    libm::floor(v.clamp(0.0, 1.0) * 255.0 + 0.5) as u8
}

pub fn quantize_plane(p: &Plane) -> Vec<u8> {
    p.data.iter().map(|&v| quantize(v)).collect()
}
