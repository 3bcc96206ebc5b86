//! Layer kernels on flat channel-last buffers. Backward functions accumulate
//! parameter gradients into caller-provided slices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Spatial extent of the valid 3x3 convolution kernel.
pub const KERNEL: usize = 3;

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(alloc::format!("{what}: {got} values, expected {want}")))
    }
}

/// Weights are `[ky][kx][cin][cout]`; output is `(h-2) x (w-2) x cout`.
/// Cross-correlation, stride 1, no padding.
pub fn conv2d_valid(x: &[f64], h: usize, w: usize, cin: usize, kernels: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    let cout = bias.len();
    if h < KERNEL || w < KERNEL {
        return Err(Error::ShapeMismatch(alloc::format!("conv input {h}x{w} smaller than 3x3")));
    }
    check_len("conv input", x.len(), h * w * cin)?;
    check_len("conv kernels", kernels.len(), KERNEL * KERNEL * cin * cout)?;
    let (ho, wo) = (h - 2, w - 2);
    let row = KERNEL * cin;
    let mut patch = vec![0.0; KERNEL * row];
    let mut out = vec![0.0; ho * wo * cout];
    for y in 0..ho {
        for xo in 0..wo {
            for ky in 0..KERNEL {
                let src = ((y + ky) * w + xo) * cin;
                patch[ky * row..(ky + 1) * row].copy_from_slice(&x[src..src + row]);
            }
            let o = &mut out[(y * wo + xo) * cout..(y * wo + xo + 1) * cout];
            o.copy_from_slice(bias);
            for (k, &p) in patch.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let wk = &kernels[k * cout..(k + 1) * cout];
                for (oc, &wv) in o.iter_mut().zip(wk) {
                    *oc += p * wv;
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of the valid convolution. Returns the input gradient when
/// `want_input_grad` is set.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_valid_backward(
    x: &[f64],
    h: usize,
    w: usize,
    cin: usize,
    kernels: &[f64],
    cout: usize,
    grad_out: &[f64],
    grad_kernels: &mut [f64],
    grad_bias: &mut [f64],
    want_input_grad: bool,
) -> Option<Vec<f64>> {
    let (ho, wo) = (h - 2, w - 2);
    let row = KERNEL * cin;
    let mut patch = vec![0.0; KERNEL * row];
    let mut gpatch = vec![0.0; KERNEL * row];
    let mut gx = if want_input_grad { vec![0.0; h * w * cin] } else { Vec::new() };
    for y in 0..ho {
        for xo in 0..wo {
            let g = &grad_out[(y * wo + xo) * cout..(y * wo + xo + 1) * cout];
            for (gb, &gv) in grad_bias.iter_mut().zip(g) {
                *gb += gv;
            }
            for ky in 0..KERNEL {
                let src = ((y + ky) * w + xo) * cin;
                patch[ky * row..(ky + 1) * row].copy_from_slice(&x[src..src + row]);
            }
            for (k, &p) in patch.iter().enumerate() {
                let wk = &kernels[k * cout..(k + 1) * cout];
                if want_input_grad {
                    let mut acc = 0.0;
                    for (&wv, &gv) in wk.iter().zip(g) {
                        acc += wv * gv;
                    }
                    gpatch[k] = acc;
                }
                if p != 0.0 {
                    let gk = &mut grad_kernels[k * cout..(k + 1) * cout];
                    for (gkv, &gv) in gk.iter_mut().zip(g) {
                        *gkv += p * gv;
                    }
                }
            }
            if want_input_grad {
                for ky in 0..KERNEL {
                    let dst = ((y + ky) * w + xo) * cin;
                    for (d, &gp) in gx[dst..dst + row].iter_mut().zip(&gpatch[ky * row..(ky + 1) * row]) {
                        *d += gp;
                    }
                }
            }
        }
    }
    want_input_grad.then_some(gx)
}

/// 2x2 max pooling, stride 2; a trailing odd row or column is dropped.
/// Returns the pooled values and, per output, the flat input index of the
/// window maximum (first in row-major order on ties).
pub fn maxpool2(x: &[f64], h: usize, w: usize, c: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if h < 2 || w < 2 {
        return Err(Error::ShapeMismatch(alloc::format!("pool input {h}x{w} smaller than 2x2")));
    }
    check_len("pool input", x.len(), h * w * c)?;
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(ho * wo * c);
    let mut arg = Vec::with_capacity(ho * wo * c);
    for y in 0..ho {
        for xo in 0..wo {
            for ch in 0..c {
                let idx = |dy: usize, dx: usize| ((2 * y + dy) * w + 2 * xo + dx) * c + ch;
                let mut best = idx(0, 0);
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = idx(dy, dx);
                    if x[i] > x[best] {
                        best = i;
                    }
                }
                out.push(x[best]);
                arg.push(best);
            }
        }
    }
    Ok((out, arg))
}

pub fn maxpool2_backward(argmax: &[usize], grad_out: &[f64], input_len: usize) -> Vec<f64> {
    let mut gx = vec![0.0; input_len];
    for (&i, &g) in argmax.iter().zip(grad_out) {
        gx[i] += g;
    }
    gx
}

/// `y = x W + b` with `W` stored `[n][m]`.
pub fn dense(x: &[f64], weights: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    let m = bias.len();
    check_len("dense weights", weights.len(), x.len() * m)?;
    let mut y = bias.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (yj, &wv) in y.iter_mut().zip(&weights[i * m..(i + 1) * m]) {
            *yj += xi * wv;
        }
    }
    Ok(y)
}

pub fn dense_backward(
    x: &[f64],
    weights: &[f64],
    grad_out: &[f64],
    grad_weights: &mut [f64],
    grad_bias: &mut [f64],
    want_input_grad: bool,
) -> Option<Vec<f64>> {
    let m = grad_out.len();
    for (gb, &g) in grad_bias.iter_mut().zip(grad_out) {
        *gb += g;
    }
    let mut gx = if want_input_grad { vec![0.0; x.len()] } else { Vec::new() };
    for (i, &xi) in x.iter().enumerate() {
        let wi = &weights[i * m..(i + 1) * m];
        if want_input_grad {
            let mut acc = 0.0;
            for (&wv, &g) in wi.iter().zip(grad_out) {
                acc += wv * g;
            }
            gx[i] = acc;
        }
        if xi != 0.0 {
            for (gw, &g) in grad_weights[i * m..(i + 1) * m].iter_mut().zip(grad_out) {
                *gw += xi * g;
            }
        }
    }
    want_input_grad.then_some(gx)
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

pub fn relu_backward(x: &[f64], grad_out: &[f64]) -> Vec<f64> {
    x.iter().zip(grad_out).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted dropout. Returns the output and the per-element scale
/// (`mask / p_keep`), empty in eval mode.
pub fn dropout(x: &[f64], p_keep: f64, mode: Mode, rng: &mut SeededRng) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(p_keep > 0.0 && p_keep <= 1.0) {
        return Err(Error::InvalidProbability(p_keep));
    }
    if mode == Mode::Eval {
        return Ok((x.to_vec(), Vec::new()));
    }
    let scale: Vec<f64> = (0..x.len())
        .map(|_| if rng.bernoulli(p_keep) { 1.0 / p_keep } else { 0.0 })
        .collect();
    Ok((x.iter().zip(&scale).map(|(a, s)| a * s).collect(), scale))
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Cross-entropy against a one-hot target; gradient w.r.t. the logits is
/// `p - y`.
pub fn softmax_xent(logits: &[f64], one_hot: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if logits.len() < 2 {
        return Err(Error::InvalidLabel(alloc::format!("{} classes", logits.len())));
    }
    if one_hot.len() != logits.len() {
        return Err(Error::InvalidLabel(alloc::format!(
            "target has {} entries for {} logits",
            one_hot.len(),
            logits.len()
        )));
    }
    let ones = one_hot.iter().filter(|&&v| v == 1.0).count();
    if ones != 1 || one_hot.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidLabel("target is not one-hot".into()));
    }
    let probs = softmax(logits);
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|&z| libm::exp(z - max)).sum::<f64>());
    let loss = one_hot.iter().zip(logits).map(|(&y, &z)| y * (lse - z)).sum();
    let grad = probs.iter().zip(one_hot).map(|(p, y)| p - y).collect();
    Ok((loss, probs, grad))
}

pub fn one_hot(label: usize, classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    if label < classes {
        v[label] = 1.0;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn randv(r: &mut SeededRng, n: usize) -> Vec<f64> {
        (0..n).map(|_| r.normal()).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
    }

    // L = proj . f(v); checks dL/dv against central differences
    fn fd_check(v: &mut [f64], analytic: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> f64 {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..v.len() {
            let orig = v[i];
            v[i] = orig + h;
            let lp = loss(v);
            v[i] = orig - h;
            let lm = loss(v);
            v[i] = orig;
            worst = worst.max(rel(analytic[i], (lp - lm) / (2.0 * h)));
        }
        worst
    }

    #[test]
    fn conv_shapes_and_ones() {
        let out = conv2d_valid(&[1.0; 9], 3, 3, 1, &[1.0; 9], &[0.0]).unwrap();
        assert_eq!(out, vec![9.0]);
        assert!(conv2d_valid(&[1.0; 4], 2, 2, 1, &[1.0; 9], &[0.0]).is_err());
        assert!(conv2d_valid(&[1.0; 9], 3, 3, 1, &[1.0; 8], &[0.0]).is_err());
    }

    #[test]
    fn conv_gradients() {
        let mut r = SeededRng::new(1);
        let (h, w, cin, cout) = (6, 6, 2, 2);
        let mut x = randv(&mut r, h * w * cin);
        let mut k = randv(&mut r, 9 * cin * cout);
        let mut b = randv(&mut r, cout);
        let proj = randv(&mut r, 4 * 4 * cout);
        let mut gk = vec![0.0; k.len()];
        let mut gb = vec![0.0; cout];
        let gx = conv2d_valid_backward(&x, h, w, cin, &k, cout, &proj, &mut gk, &mut gb, true).unwrap();
        let (k0, b0, x0) = (k.clone(), b.clone(), x.clone());
        assert!(fd_check(&mut x, &gx, |v| dot(&proj, &conv2d_valid(v, h, w, cin, &k0, &b0).unwrap())) < 1e-4);
        assert!(fd_check(&mut k, &gk, |v| dot(&proj, &conv2d_valid(&x0, h, w, cin, v, &b0).unwrap())) < 1e-4);
        assert!(fd_check(&mut b, &gb, |v| dot(&proj, &conv2d_valid(&x0, h, w, cin, &k0, v).unwrap())) < 1e-4);
    }

    #[test]
    fn pool_examples() {
        let (out, arg) = maxpool2(&[1.0, 2.0, 3.0, 4.0], 2, 2, 1).unwrap();
        assert_eq!(out, vec![4.0]);
        assert_eq!(arg, vec![3]);
        let (out, _) = maxpool2(&vec![0.0; 5 * 5], 5, 5, 1).unwrap();
        assert_eq!(out.len(), 4);
        let (_, arg) = maxpool2(&[7.0, 7.0, 7.0, 7.0], 2, 2, 1).unwrap();
        assert_eq!(arg, vec![0]);
    }

    #[test]
    fn pool_gradient() {
        let mut r = SeededRng::new(2);
        let mut x = randv(&mut r, 36);
        let proj = randv(&mut r, 9);
        let (_, arg) = maxpool2(&x, 6, 6, 1).unwrap();
        let gx = maxpool2_backward(&arg, &proj, 36);
        assert!(fd_check(&mut x, &gx, |v| dot(&proj, &maxpool2(v, 6, 6, 1).unwrap().0)) < 1e-4);
    }

    #[test]
    fn dense_identity_and_gradient() {
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        assert_eq!(dense(&[1.0, -2.0, 3.0], &eye, &[0.0; 3]).unwrap(), vec![1.0, -2.0, 3.0]);

        let mut r = SeededRng::new(3);
        let mut x = randv(&mut r, 5);
        let mut wts = randv(&mut r, 15);
        let mut b = randv(&mut r, 3);
        let proj = randv(&mut r, 3);
        let mut gw = vec![0.0; 15];
        let mut gb = vec![0.0; 3];
        let gx = dense_backward(&x, &wts, &proj, &mut gw, &mut gb, true).unwrap();
        let (w0, b0, x0) = (wts.clone(), b.clone(), x.clone());
        assert!(fd_check(&mut x, &gx, |v| dot(&proj, &dense(v, &w0, &b0).unwrap())) < 1e-4);
        assert!(fd_check(&mut wts, &gw, |v| dot(&proj, &dense(&x0, v, &b0).unwrap())) < 1e-4);
        assert!(fd_check(&mut b, &gb, |v| dot(&proj, &dense(&x0, &w0, v).unwrap())) < 1e-4);
    }

    #[test]
    fn relu_and_dropout() {
        assert_eq!(relu(&[-1.0, 2.0]), vec![0.0, 2.0]);
        let mut r = SeededRng::new(0);
        let x = vec![0.3, -1.2, 4.0];
        assert_eq!(dropout(&x, 0.5, Mode::Eval, &mut r).unwrap().0, x);
        assert_eq!(dropout(&x, 0.0, Mode::Train, &mut r), Err(Error::InvalidProbability(0.0)));
        assert_eq!(dropout(&x, 1.5, Mode::Train, &mut r), Err(Error::InvalidProbability(1.5)));
    }

    #[test]
    fn dropout_is_unbiased() {
        let mut r = SeededRng::new(77);
        let x = vec![1.0, -2.0, 0.5, 3.0];
        let mut acc = vec![0.0; 4];
        let n = 10_000;
        for _ in 0..n {
            let (y, _) = dropout(&x, 0.5, Mode::Train, &mut r).unwrap();
            for (a, v) in acc.iter_mut().zip(&y) {
                *a += v;
            }
        }
        for (a, v) in acc.iter().zip(&x) {
            assert!((a / n as f64 - v).abs() <= 0.02 * v.abs());
        }
    }

    #[test]
    fn softmax_examples() {
        let (loss, p, _) = softmax_xent(&[0.3, 0.3], &[1.0, 0.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (loss - core::f64::consts::LN_2).abs() < 1e-15);
        let (loss, p, _) = softmax_xent(&[1000.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(loss.is_finite() && (p[0] - 1.0).abs() < 1e-15 && p[1] >= 0.0);
        assert!(softmax_xent(&[1.0], &[1.0]).is_err());
        assert!(softmax_xent(&[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert!(softmax_xent(&[1.0, 2.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn softmax_grad_is_p_minus_y() {
        let mut z = vec![0.2, -1.3, 0.7];
        let y = vec![0.0, 0.0, 1.0];
        let (_, p, g) = softmax_xent(&z, &y).unwrap();
        for i in 0..3 {
            assert_eq!(g[i], p[i] - y[i]);
        }
        let h = 1e-5;
        for i in 0..3 {
            let o = z[i];
            z[i] = o + h;
            let lp = softmax_xent(&z, &y).unwrap().0;
            z[i] = o - h;
            let lm = softmax_xent(&z, &y).unwrap().0;
            z[i] = o;
            assert!(((lp - lm) / (2.0 * h) - g[i]).abs() < 1e-6);
        }
    }
}
