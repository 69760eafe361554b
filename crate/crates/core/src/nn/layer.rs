use super::NnError;
use crate::numerics::{Fxp8Format, PrecisionKind};
use crate::quant::{PactParams, PrecisionMode, WeightQuantConfig};

pub const CONV_KERNEL: usize = 3;
pub const POOL_WINDOW: usize = 2;
pub const CANONICAL_DROPOUT: f32 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Padding {
    /// No padding; output length `L - 2`.
    Valid,
    /// One zero on each side; output length `L`.
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    /// Declares the network input shape; carries no computation.
    Input { channels: usize, length: usize },
    Conv1D { in_ch: usize, out_ch: usize, padding: Padding },
    ReLU,
    MaxPool1D,
    Dropout { rate: f32 },
    Flatten,
    Dense { in_dim: usize, out_dim: usize },
    Softmax,
}

impl LayerSpec {
    pub fn is_weighted(&self) -> bool {
        matches!(self, Self::Conv1D { .. } | Self::Dense { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Input { .. } => "input",
            Self::Conv1D { .. } => "conv1d",
            Self::ReLU => "relu",
            Self::MaxPool1D => "maxpool",
            Self::Dropout { .. } => "dropout",
            Self::Flatten => "flatten",
            Self::Dense { .. } => "dense",
            Self::Softmax => "softmax",
        }
    }

    /// `(weight count, bias count)`.
    pub fn param_counts(&self) -> (usize, usize) {
        match *self {
            Self::Conv1D { in_ch, out_ch, .. } => (out_ch * in_ch * CONV_KERNEL, out_ch),
            Self::Dense { in_dim, out_dim } => (out_dim * in_dim, out_dim),
            _ => (0, 0),
        }
    }

    /// Output shape for an input of shape `(channels, length)`.
    pub fn output_shape(&self, (c, l): (usize, usize)) -> Result<(usize, usize), NnError> {
        let chain = |msg: String| Err(NnError::InvalidChain(msg));
        match *self {
            Self::Input { channels, length } => {
                if (c, l) != (channels, length) {
                    return chain(format!("input declared {channels}x{length}, got {c}x{l}"));
                }
                Ok((c, l))
            }
            Self::Conv1D { in_ch, out_ch, padding } => {
                if c != in_ch {
                    return chain(format!("conv1d expects {in_ch} channels, got {c}"));
                }
                match padding {
                    Padding::Same => Ok((out_ch, l)),
                    Padding::Valid if l >= CONV_KERNEL => Ok((out_ch, l - (CONV_KERNEL - 1))),
                    Padding::Valid => chain(format!("conv1d needs length >= 3, got {l}")),
                }
            }
            Self::MaxPool1D => {
                if l < POOL_WINDOW {
                    return chain(format!("maxpool needs length >= 2, got {l}"));
                }
                Ok((c, l / POOL_WINDOW))
            }
            Self::ReLU | Self::Dropout { .. } | Self::Softmax => Ok((c, l)),
            Self::Flatten => Ok((1, c * l)),
            Self::Dense { in_dim, out_dim } => {
                if c != 1 || l != in_dim {
                    return chain(format!("dense expects 1x{in_dim}, got {c}x{l}"));
                }
                Ok((1, out_dim))
            }
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |msg: String| Err(NnError::InvalidChain(msg));
        match *self {
            Self::Input { channels, length } if channels == 0 || length == 0 => {
                bad(format!("input shape {channels}x{length} must be positive"))
            }
            Self::Conv1D { in_ch, out_ch, .. } if in_ch == 0 || out_ch == 0 => {
                bad(format!("conv1d channels {in_ch}->{out_ch} must be positive"))
            }
            Self::Dense { in_dim, out_dim } if in_dim == 0 || out_dim == 0 => {
                bad(format!("dense dims {in_dim}->{out_dim} must be positive"))
            }
            Self::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                bad(format!("dropout rate {rate} outside [0, 1)"))
            }
            _ => Ok(()),
        }
    }
}

/// Per-layer quantization parameters as stored in the model container.
///
/// Only the fields relevant to the layer's precision are used: INT8 reads
/// `scale`, `w_lo`, `w_hi`, `alpha` and `bits`; FXP8 reads `scale` (the
/// weight pre-scale) and `frac_bits`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    pub scale: f32,
    pub w_lo: f32,
    pub w_hi: f32,
    pub alpha: f32,
    pub bits: u8,
    pub frac_bits: u8,
}

impl Default for QuantParams {
    fn default() -> Self {
        Self { scale: 1.0, w_lo: -1.0, w_hi: 1.0, alpha: 1.0, bits: 8, frac_bits: 6 }
    }
}

impl QuantParams {
    pub fn weight_config(&self) -> WeightQuantConfig {
        WeightQuantConfig { bits: self.bits, w_lo: self.w_lo, w_hi: self.w_hi, scale: self.scale }
    }

    pub fn pact(&self) -> PactParams {
        PactParams { alpha: self.alpha, bits: self.bits }
    }

    /// Resolve the arithmetic mode for `kind`.
    pub fn mode(&self, kind: PrecisionKind) -> Result<PrecisionMode, NnError> {
        let mode = match kind {
            PrecisionKind::Fp32 => PrecisionMode::Fp32,
            PrecisionKind::Bf16 => PrecisionMode::Bf16,
            PrecisionKind::Int8 => PrecisionMode::Int8 {
                weights: self.weight_config(),
                act: self.pact(),
                signed_input: false,
            },
            PrecisionKind::Fxp8 => PrecisionMode::Fxp8 {
                format: Fxp8Format::new(self.frac_bits)?,
                weight_scale: self.scale,
            },
        };
        mode.validate()?;
        Ok(mode)
    }
}

/// One layer of a model with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub precision: PrecisionKind,
    pub quant: QuantParams,
    /// Conv: `[out_ch][in_ch][3]`; dense: `[out_dim][in_dim]`.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Layer {
    pub fn new(spec: LayerSpec) -> Self {
        let (nw, nb) = spec.param_counts();
        Self {
            spec,
            precision: PrecisionKind::Fp32,
            quant: QuantParams::default(),
            weights: vec![0.0; nw],
            bias: vec![0.0; nb],
        }
    }

    pub fn with_params(spec: LayerSpec, weights: Vec<f32>, bias: Vec<f32>) -> Result<Self, NnError> {
        let layer = Self { weights, bias, ..Self::new(spec) };
        layer.check_params()?;
        Ok(layer)
    }

    pub fn check_params(&self) -> Result<(), NnError> {
        self.spec.validate()?;
        let (nw, nb) = self.spec.param_counts();
        if self.weights.len() != nw || self.bias.len() != nb {
            return Err(NnError::ShapeMismatch(format!(
                "{} expects {nw} weights and {nb} biases, got {} and {}",
                self.spec.name(),
                self.weights.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}
