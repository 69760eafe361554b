//! Layer kernels. Convolution and dense layers share one datapath model:
//! every output element is a dot product of a weight row with an input
//! patch, evaluated under the layer's precision.
//!
//! * FP32: f32 multiply-accumulate in patch order, then bias.
//! * BF16: operands and bias narrowed to BF16, products accumulated in an
//!   f32 register, result narrowed to BF16.
//! * INT8: weights as PwQ codes re-centred by 128, activations as PACT codes
//!   (re-centred by 128) or symmetric signed codes, i8 x i8 products in a
//!   32-bit accumulator, one f64 rescale per output element.
//! * FXP8: weights `w / k` and activations encoded in the layer's Q format,
//!   i8 x i8 products in a 32-bit accumulator, one rescale by `k * 2^-2f`.

use rayon::prelude::*;

use super::{NnError, Padding, Tensor1D, CONV_KERNEL, POOL_WINDOW};
use crate::numerics::{
    cordic_exp, fxp8_encode, mac_int, narrow, Fxp8Format, NumericsError,
};
use crate::quant::{
    pact_quantize, quantize_signed_activation, quantize_weight, PactParams, PrecisionMode,
    WeightQuantConfig,
};

/// Zero point subtracted from unsigned 8-bit codes to make them i8.
pub const CODE_OFFSET: i32 = 128;

/// How the softmax exponentials are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SoftmaxImpl {
    #[default]
    Exact,
    /// Through the hyperbolic CORDIC unit, `exp = cosh + sinh`.
    Cordic { iters: u32 },
}

/// Operands prepared for one layer under one precision.
enum Datapath {
    Float { weights: Vec<f32>, bias: Vec<f32>, inputs: Vec<f32>, pad: f32, bf16: bool },
    Int {
        weights: Vec<i8>,
        row_sums: Vec<i32>,
        bias: Vec<f32>,
        inputs: Vec<i8>,
        pad: i8,
        rescale: Rescale,
    },
}

#[derive(Debug, Clone, Copy)]
enum Rescale {
    /// `y = a_dx * (P + zx * Sw) + c_dx * Sx + b`.
    Int8 { a_dx: f64, c_dx: f64, zero_point: i32 },
    /// `y = factor * P + b`.
    Fxp8 { factor: f64 },
}

/// INT8 rescale constants.
///
/// A weight code `c` stands for `k * (c * dw + W_l)` with `dw = (W_h - W_l) / 255`,
/// i.e. `a * (c - 128) + c0` with `a = k * dw` and `c0 = k * (W_l + 128 * dw)`.
/// An activation code `x` stands for `x * dx`. Both products are formed in
/// f64 in exactly this order.
fn int8_rescale(w: &WeightQuantConfig, act: &PactParams, signed_input: bool) -> (f64, f64, f64) {
    let k = f64::from(w.scale);
    let dw = (f64::from(w.w_hi) - f64::from(w.w_lo)) / 255.0;
    let a = k * dw;
    let c0 = k * (f64::from(w.w_lo) + 128.0 * dw);
    let dx = if signed_input { f64::from(act.alpha) / 127.0 } else { f64::from(act.alpha) / 255.0 };
    (a * dx, c0 * dx, dx)
}

fn prepare(weights: &[f32], bias: &[f32], fan: usize, x: &[f32], mode: &PrecisionMode) -> Result<Datapath, NnError> {
    mode.validate()?;
    Ok(match *mode {
        PrecisionMode::Fp32 => Datapath::Float {
            weights: weights.to_vec(),
            bias: bias.to_vec(),
            inputs: x.to_vec(),
            pad: 0.0,
            bf16: false,
        },
        PrecisionMode::Bf16 => Datapath::Float {
            weights: weights.iter().map(|&v| narrow(v)).collect(),
            bias: bias.iter().map(|&v| narrow(v)).collect(),
            inputs: x.iter().map(|&v| narrow(v)).collect(),
            pad: 0.0,
            bf16: true,
        },
        PrecisionMode::Int8 { weights: wcfg, act, signed_input } => {
            let wq: Vec<i8> = weights
                .iter()
                .map(|&v| (quantize_weight(v, &wcfg) as i32 - CODE_OFFSET) as i8)
                .collect();
            let (inputs, pad, zero_point) = if signed_input {
                let codes = x
                    .iter()
                    .map(|&v| quantize_signed_activation(v, &act).map(|c| c as i8))
                    .collect::<Result<Vec<_>, _>>()?;
                (codes, 0i8, 0)
            } else {
                let codes = x
                    .iter()
                    .map(|&v| pact_quantize(v, &act).map(|(c, _)| (c as i32 - CODE_OFFSET) as i8))
                    .collect::<Result<Vec<_>, _>>()?;
                (codes, (-CODE_OFFSET) as i8, CODE_OFFSET)
            };
            let (a_dx, c_dx, _) = int8_rescale(&wcfg, &act, signed_input);
            Datapath::Int {
                row_sums: row_sums(&wq, fan),
                weights: wq,
                bias: bias.to_vec(),
                inputs,
                pad,
                rescale: Rescale::Int8 { a_dx, c_dx, zero_point },
            }
        }
        PrecisionMode::Fxp8 { format, weight_scale } => {
            let k = f64::from(weight_scale);
            let wq: Vec<i8> = weights
                .iter()
                .map(|&v| fxp8_encode((f64::from(v) / k) as f32, format))
                .collect();
            Datapath::Int {
                row_sums: row_sums(&wq, fan),
                weights: wq,
                bias: bias.to_vec(),
                inputs: x.iter().map(|&v| fxp8_encode(v, format)).collect(),
                pad: 0,
                rescale: Rescale::Fxp8 { factor: k * fxp_product_step(format) },
            }
        }
    })
}

fn fxp_product_step(format: Fxp8Format) -> f64 {
    (-2.0 * f64::from(format.frac_bits())).exp2()
}

fn row_sums(w: &[i8], fan: usize) -> Vec<i32> {
    w.chunks(fan).map(|r| r.iter().map(|&v| i32::from(v)).sum()).collect()
}

/// Input patches, `positions x fan`, gathered from channel-major `x`.
fn gather<T: Copy>(x: &[T], channels: usize, length: usize, padding: Padding, pad: T) -> (Vec<T>, usize) {
    let (lead, out_len) = match padding {
        Padding::Valid => (0usize, length + 1 - CONV_KERNEL),
        Padding::Same => (1usize, length),
    };
    let fan = channels * CONV_KERNEL;
    let mut patches = Vec::with_capacity(out_len * fan);
    for pos in 0..out_len {
        for c in 0..channels {
            for k in 0..CONV_KERNEL {
                let src = (pos + k).checked_sub(lead).filter(|&i| i < length);
                patches.push(src.map_or(pad, |i| x[c * length + i]));
            }
        }
    }
    (patches, out_len)
}

fn float_dot(w: &[f32], p: &[f32]) -> f32 {
    let mut acc = 0.0f32;
    for (a, b) in w.iter().zip(p) {
        acc += a * b;
    }
    acc
}

fn int_dot(w: &[i8], p: &[i8]) -> Result<i32, NumericsError> {
    w.iter().zip(p).try_fold(0i32, |acc, (&a, &b)| mac_int(acc, a, b))
}

/// Evaluate every (row, patch) pair; output is `rows x positions`.
fn run(dp: &Datapath, rows: usize, fan: usize, positions: usize, patches_f: &[f32], patches_i: &[i8]) -> Result<Vec<f32>, NnError> {
    let per_row: Vec<Result<Vec<f32>, NnError>> = (0..rows)
        .into_par_iter()
        .map(|r| {
            let mut out = Vec::with_capacity(positions);
            match dp {
                Datapath::Float { weights, bias, bf16, .. } => {
                    let wr = &weights[r * fan..(r + 1) * fan];
                    for pos in 0..positions {
                        let acc = float_dot(wr, &patches_f[pos * fan..(pos + 1) * fan]);
                        out.push(if *bf16 { narrow(acc + bias[r]) } else { acc + bias[r] });
                    }
                }
                Datapath::Int { weights, row_sums, bias, rescale, .. } => {
                    let wr = &weights[r * fan..(r + 1) * fan];
                    for pos in 0..positions {
                        let patch = &patches_i[pos * fan..(pos + 1) * fan];
                        let p = int_dot(wr, patch)?;
                        let y = match *rescale {
                            Rescale::Int8 { a_dx, c_dx, zero_point } => {
                                let sx = patch.iter().try_fold(0i32, |s, &v| {
                                    s.checked_add(i32::from(v) + zero_point)
                                });
                                let acc = zero_point
                                    .checked_mul(row_sums[r])
                                    .and_then(|z| p.checked_add(z));
                                let (Some(sx), Some(acc)) = (sx, acc) else {
                                    return Err(NumericsError::AccumulatorOverflow {
                                        acc: p,
                                        product: row_sums[r],
                                    }
                                    .into());
                                };
                                a_dx * f64::from(acc) + c_dx * f64::from(sx) + f64::from(bias[r])
                            }
                            Rescale::Fxp8 { factor } => factor * f64::from(p) + f64::from(bias[r]),
                        };
                        out.push(y as f32);
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut data = Vec::with_capacity(rows * positions);
    for row in per_row {
        data.extend(row?);
    }
    Ok(data)
}

/// Cross-correlation with a 3-tap kernel, stride 1. `w` is `[out_ch][in_ch][3]`.
pub fn conv1d_forward(
    x: &Tensor1D,
    w: &[f32],
    b: &[f32],
    out_ch: usize,
    padding: Padding,
    mode: &PrecisionMode,
) -> Result<Tensor1D, NnError> {
    let (in_ch, length) = x.shape();
    let fan = in_ch * CONV_KERNEL;
    if w.len() != out_ch * fan || b.len() != out_ch {
        return Err(NnError::ShapeMismatch(format!(
            "conv1d {in_ch}->{out_ch} needs {} weights and {out_ch} biases, got {} and {}",
            out_ch * fan,
            w.len(),
            b.len()
        )));
    }
    if padding == Padding::Valid && length < CONV_KERNEL {
        return Err(NnError::LengthTooShort { length, min: CONV_KERNEL });
    }
    let dp = prepare(w, b, fan, x.data(), mode)?;
    let (data, out_len) = match &dp {
        Datapath::Float { inputs, pad, .. } => {
            let (patches, out_len) = gather(inputs, in_ch, length, padding, *pad);
            (run(&dp, out_ch, fan, out_len, &patches, &[])?, out_len)
        }
        Datapath::Int { inputs, pad, .. } => {
            let (patches, out_len) = gather(inputs, in_ch, length, padding, *pad);
            (run(&dp, out_ch, fan, out_len, &[], &patches)?, out_len)
        }
    };
    Tensor1D::new(out_ch, out_len, data)
}

/// `y = W x + b` with `W` as `[out_dim][in_dim]`; `x` must be one channel.
pub fn dense_forward(x: &Tensor1D, w: &[f32], b: &[f32], mode: &PrecisionMode) -> Result<Tensor1D, NnError> {
    let in_dim = x.length();
    if x.channels() != 1 {
        return Err(NnError::ShapeMismatch(format!(
            "dense input must be flat, got {} channels",
            x.channels()
        )));
    }
    if b.is_empty() || w.len() != b.len() * in_dim {
        return Err(NnError::ShapeMismatch(format!(
            "dense with {} outputs and input {in_dim} needs {} weights, got {}",
            b.len(),
            b.len() * in_dim,
            w.len()
        )));
    }
    let out_dim = b.len();
    let dp = prepare(w, b, in_dim, x.data(), mode)?;
    let data = match &dp {
        Datapath::Float { inputs, .. } => run(&dp, out_dim, in_dim, 1, inputs, &[])?,
        Datapath::Int { inputs, .. } => run(&dp, out_dim, in_dim, 1, &[], inputs)?,
    };
    Tensor1D::new(1, out_dim, data)
}

pub fn relu_forward(x: &Tensor1D) -> Tensor1D {
    // keeps NaN (max would drop it) and maps -0.0 to +0.0
    x.map(|v| if v > 0.0 || v.is_nan() { v } else { 0.0 })
}

/// Non-overlapping window-2 max per channel; an odd trailing element is
/// dropped.
pub fn maxpool_forward(x: &Tensor1D) -> Result<Tensor1D, NnError> {
    let (c, l) = x.shape();
    if l < POOL_WINDOW {
        return Err(NnError::LengthTooShort { length: l, min: POOL_WINDOW });
    }
    let out_len = l / POOL_WINDOW;
    let mut data = Vec::with_capacity(c * out_len);
    for ch in 0..c {
        let row = x.row(ch);
        for i in 0..out_len {
            let (a, b) = (row[2 * i], row[2 * i + 1]);
            data.push(if a.is_nan() || b.is_nan() { f32::NAN } else { a.max(b) });
        }
    }
    Tensor1D::new(c, out_len, data)
}

/// Inference-time dropout: the identity, no rescaling.
pub fn dropout_inference(x: &Tensor1D, _rate: f32) -> Tensor1D {
    x.clone()
}

/// Channel-major linearisation into a single channel.
pub fn flatten(x: &Tensor1D) -> Tensor1D {
    Tensor1D::new(1, x.channels() * x.length(), x.data().to_vec()).expect("non-empty tensor")
}

/// Softmax over all elements of `logits`, with the maximum subtracted first.
pub fn softmax_forward(logits: &[f32], imp: SoftmaxImpl) -> Result<Vec<f32>, NnError> {
    if logits.is_empty() {
        return Err(NnError::EmptyInput);
    }
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f64> = match imp {
        SoftmaxImpl::Exact => logits.iter().map(|&z| (f64::from(z) - f64::from(max)).exp()).collect(),
        SoftmaxImpl::Cordic { iters } => logits
            .iter()
            .map(|&z| cordic_exp(z - max, iters).map(f64::from))
            .collect::<Result<_, _>>()?,
    };
    let sum: f64 = exps.iter().sum();
    Ok(exps.iter().map(|e| (e / sum) as f32).collect())
}
