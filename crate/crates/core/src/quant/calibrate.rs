//! Picks per-layer quantization parameters from calibration activations.
//!
//! INT8 layers get the scaled PwQ config (`k` from the mean magnitude,
//! bounds at the clip percentile) and a PACT `alpha` at the same percentile
//! of the layer's observed input magnitudes. FXP8 layers get the finest Q
//! format covering that percentile, and a weight pre-scale that maps the
//! weight percentile onto the format's largest value.

use std::collections::BTreeMap;

use super::{abs_percentile, WeightQuantConfig, CLIP_PERCENTILE};
use crate::nn::{ForwardOptions, ModelSpec, NnError, QuantParams, Tensor1D};
use crate::numerics::{Fxp8Format, PrecisionKind};

/// Input magnitudes seen by each weighted layer over `samples`, in FP32.
pub fn layer_inputs(model: &ModelSpec, samples: &[Tensor1D]) -> Result<BTreeMap<usize, Vec<f32>>, NnError> {
    let weighted = model.weighted_layers();
    let mut seen: BTreeMap<usize, Vec<f32>> = weighted.iter().map(|&i| (i, Vec::new())).collect();
    let opts = ForwardOptions {
        precision_override: Some(PrecisionKind::Fp32),
        keep_snapshots: true,
        ..ForwardOptions::default()
    };
    for x in samples {
        let out = model.forward(x, &opts)?;
        for &i in &weighted {
            // layer 0 is the input declaration, so i >= 1
            seen.get_mut(&i).unwrap().extend_from_slice(out.snapshots[i - 1].data());
        }
    }
    Ok(seen)
}

/// Parameters for one weighted layer under `kind`.
pub fn layer_params(weights: &[f32], inputs: &[f32], kind: PrecisionKind) -> Result<QuantParams, NnError> {
    let mut act = abs_percentile(inputs, CLIP_PERCENTILE);
    if act <= 0.0 {
        act = 1.0;
    }
    let mut q = QuantParams { alpha: act as f32, ..QuantParams::default() };
    match kind {
        PrecisionKind::Int8 => {
            let cfg = WeightQuantConfig::scaled(weights, 8)?;
            q.scale = cfg.scale;
            q.w_lo = cfg.w_lo;
            q.w_hi = cfg.w_hi;
        }
        PrecisionKind::Fxp8 => {
            let fmt = Fxp8Format::covering(act);
            q.frac_bits = fmt.frac_bits();
            let wmax = abs_percentile(weights, CLIP_PERCENTILE);
            q.scale = if wmax > 0.0 { (wmax / fmt.max_value()) as f32 } else { 1.0 };
        }
        PrecisionKind::Fp32 | PrecisionKind::Bf16 => {}
    }
    Ok(q)
}

/// Copy of `model` with each weighted layer tagged per `assignment` (layers
/// missing from it keep their tag) and its parameters calibrated for that
/// tag.
pub fn calibrate(
    model: &ModelSpec,
    samples: &[Tensor1D],
    assignment: &BTreeMap<usize, PrecisionKind>,
) -> Result<ModelSpec, NnError> {
    let inputs = layer_inputs(model, samples)?;
    let mut out = model.clone();
    for (&i, seen) in &inputs {
        let layer = &mut out.layers[i];
        let kind = assignment.get(&i).copied().unwrap_or(layer.precision);
        layer.quant = layer_params(&layer.weights, seen, kind).map_err(|e| e.at(i))?;
        layer.precision = kind;
    }
    Ok(out)
}

/// [`calibrate`] with every weighted layer set to `kind`.
pub fn calibrate_uniform(model: &ModelSpec, samples: &[Tensor1D], kind: PrecisionKind) -> Result<ModelSpec, NnError> {
    let assignment = model.weighted_layers().into_iter().map(|i| (i, kind)).collect();
    calibrate(model, samples, &assignment)
}

/// Gradient-norm estimate for each weighted layer by central differences of
/// `loss` over at most 32 labelled samples. Only weights are perturbed.
pub fn grad_norms_fd(
    model: &ModelSpec,
    samples: &[(Tensor1D, usize)],
    step: f32,
    loss: impl Fn(&[f32], usize) -> f64 + Sync,
) -> Result<Vec<(usize, f64)>, NnError> {
    const MAX_SAMPLES: usize = 32;
    let samples = &samples[..samples.len().min(MAX_SAMPLES)];
    let opts = ForwardOptions { precision_override: Some(PrecisionKind::Fp32), ..ForwardOptions::default() };
    let total_loss = |m: &ModelSpec| -> Result<f64, NnError> {
        let mut acc = 0.0;
        for (x, y) in samples {
            acc += loss(&m.forward(x, &opts)?.probs, *y);
        }
        Ok(acc / samples.len().max(1) as f64)
    };
    let mut out = Vec::new();
    let mut probe = model.clone();
    for i in model.weighted_layers() {
        let mut sq = 0.0f64;
        for j in 0..model.layers[i].weights.len() {
            let w0 = model.layers[i].weights[j];
            probe.layers[i].weights[j] = w0 + step;
            let up = total_loss(&probe)?;
            probe.layers[i].weights[j] = w0 - step;
            let down = total_loss(&probe)?;
            probe.layers[i].weights[j] = w0;
            let g = (up - down) / (2.0 * f64::from(step));
            sq += g * g;
        }
        out.push((i, sq.sqrt()));
    }
    Ok(out)
}

/// Cross-entropy of a probability vector against a class index.
pub fn cross_entropy(probs: &[f32], label: usize) -> f64 {
    -(f64::from(probs[label]).max(1e-12)).ln()
}
