//! Post-training quantization: piecewise weight quantization with a scale
//! factor and clip bounds, PACT activation clipping, per-layer sensitivity
//! scoring and the precision assignment policy built on it.

mod assign;
pub mod calibrate;
mod pact;
mod pwq;
mod sensitivity;

pub use calibrate::{calibrate, calibrate_uniform, cross_entropy, grad_norms_fd, layer_inputs, layer_params};
pub use assign::{assign_precisions, AssignPolicy, AssignRule, PrecisionAssignment};
pub use pact::{pact_clip, pact_quantize, quantize_signed_activation, PactParams};
pub use pwq::{
    dequantize_weights, fake_quantize, quantize_weight, quantize_weights, reconstruct,
    weight_scale, WeightQuantConfig, CLIP_PERCENTILE,
};
pub use sensitivity::{
    layer_sensitivity, model_sensitivity, parse_grad_norms, SensitivityEntry, SensitivityReport,
};

use thiserror::Error;

use crate::numerics::{Fxp8Format, PrecisionKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantError {
    #[error("tensor is empty")]
    EmptyTensor,
    #[error("scale factor must be finite and > 0, got {0}")]
    InvalidScale(f32),
    #[error("clip range must satisfy w_lo < w_hi, got [{lo}, {hi}]")]
    InvalidClipRange { lo: f32, hi: f32 },
    #[error("unsupported bit width {0} (expected 4, 8 or 16)")]
    InvalidBitWidth(u8),
    #[error("code {code} outside [0, {max}]")]
    CodeOutOfRange { code: u32, max: u32 },
    #[error("PACT alpha must be finite and > 0, got {0}")]
    InvalidAlpha(f32),
    #[error("gradient norm must be finite and >= 0, got {0}")]
    InvalidGradNorm(f64),
    #[error("high-precision budget {budget} exceeds the {layers} scored layers")]
    PolicyBudgetExceedsLayerCount { budget: usize, layers: usize },
    #[error("no gradient norm for layer {0}")]
    MissingGradNorm(usize),
    #[error("calibration file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Arithmetic a layer runs under, with exactly the parameters that mode
/// needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrecisionMode {
    Fp32,
    Bf16,
    /// Weights through the PwQ quantizer (8-bit codes), activations through
    /// PACT (8-bit codes). With `signed_input` the activations use the
    /// symmetric signed quantizer instead, for inputs that are not behind a
    /// rectifier.
    Int8 { weights: WeightQuantConfig, act: PactParams, signed_input: bool },
    /// Activations encoded directly in `format`; weights are divided by
    /// `weight_scale` before encoding and the scale is restored once per
    /// output element.
    Fxp8 { format: Fxp8Format, weight_scale: f32 },
}

impl PrecisionMode {
    pub fn kind(&self) -> PrecisionKind {
        match self {
            Self::Fp32 => PrecisionKind::Fp32,
            Self::Bf16 => PrecisionKind::Bf16,
            Self::Int8 { .. } => PrecisionKind::Int8,
            Self::Fxp8 { .. } => PrecisionKind::Fxp8,
        }
    }

    pub fn validate(&self) -> Result<(), QuantError> {
        match self {
            Self::Fp32 | Self::Bf16 => Ok(()),
            Self::Int8 { weights, act, .. } => {
                weights.validate()?;
                act.validate()?;
                if weights.bits != 8 {
                    return Err(QuantError::InvalidBitWidth(weights.bits));
                }
                if act.bits != 8 {
                    return Err(QuantError::InvalidBitWidth(act.bits));
                }
                Ok(())
            }
            Self::Fxp8 { weight_scale, .. } => {
                if !(weight_scale.is_finite() && *weight_scale > 0.0) {
                    return Err(QuantError::InvalidScale(*weight_scale));
                }
                Ok(())
            }
        }
    }
}

/// `2^n - 1` as a float.
pub(crate) fn levels(bits: u8) -> f64 {
    f64::from((1u32 << bits) - 1)
}

/// Nearest-rank percentile of `|values|`; `q` in (0, 1].
pub(crate) fn abs_percentile(values: &[f32], q: f64) -> f64 {
    let mut mags: Vec<f64> = values
        .iter()
        .filter(|v| v.is_finite())
        .map(|v| f64::from(v.abs()))
        .collect();
    if mags.is_empty() {
        return 0.0;
    }
    mags.sort_by(f64::total_cmp);
    let rank = ((q * mags.len() as f64).ceil() as usize).clamp(1, mags.len());
    mags[rank - 1]
}
