//! Scalar arithmetic for the four datapath precisions.
//!
//! Everything here is a pure function on value types. The float paths
//! (FP32, BF16) propagate NaN and infinity; the fixed-point paths (INT8,
//! FXP8) have no encoding for them and map non-finite inputs to code 0,
//! reporting the event to the caller so it can be counted.

mod accum;
mod bf16;
mod cordic;
mod fxp8;

pub use accum::{mac_bf16, mac_int, AccumValue};
pub use bf16::{bf16_to_fp32, fp32_to_bf16, narrow, Bf16Value};
pub use cordic::{
    cordic_exp, cordic_hyperbolic, cordic_sigmoid, cordic_tanh, DEFAULT_CORDIC_ITERS,
    MIN_CORDIC_ITERS,
};
pub use fxp8::{fxp8_decode, fxp8_encode, fxp8_encode_checked, Fxp8Format};

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericsError {
    #[error("32-bit accumulator overflow: {acc} + {product} does not fit")]
    AccumulatorOverflow { acc: i32, product: i32 },
    #[error("CORDIC needs at least {min} iterations, got {got}")]
    IterationCountTooSmall { got: u32, min: u32 },
    #[error("FXP8 fractional bits must be in 0..=7, got {0}")]
    InvalidFracBits(u8),
}

/// Arithmetic kind executed by a layer on the shared datapath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PrecisionKind {
    #[default]
    Fp32,
    Bf16,
    Int8,
    Fxp8,
}

impl PrecisionKind {
    pub const ALL: [PrecisionKind; 4] = [Self::Fp32, Self::Bf16, Self::Int8, Self::Fxp8];

    /// Tag used by the model container.
    pub fn tag(self) -> u8 {
        match self {
            Self::Fp32 => 0,
            Self::Bf16 => 1,
            Self::Int8 => 2,
            Self::Fxp8 => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Self::Fp32),
            1 => Some(Self::Bf16),
            2 => Some(Self::Int8),
            3 => Some(Self::Fxp8),
            _ => None,
        }
    }

    pub fn is_integer(self) -> bool {
        matches!(self, Self::Int8 | Self::Fxp8)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Fp32 => "fp32",
            Self::Bf16 => "bf16",
            Self::Int8 => "int8",
            Self::Fxp8 => "fxp8",
        }
    }
}

impl fmt::Display for PrecisionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PrecisionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fp32" => Ok(Self::Fp32),
            "bf16" => Ok(Self::Bf16),
            "int8" => Ok(Self::Int8),
            "fxp8" => Ok(Self::Fxp8),
            other => Err(format!("unknown precision '{other}' (expected fp32|bf16|int8|fxp8)")),
        }
    }
}
