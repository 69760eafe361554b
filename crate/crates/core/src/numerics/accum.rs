use super::{Bf16Value, NumericsError};

/// Accumulator register of the MAC bank: 32-bit integer on the INT8/FXP8
/// paths, 32-bit float on the BF16/FP32 paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AccumValue {
    Int(i32),
    Float(f32),
}

impl AccumValue {
    pub fn as_f64(self) -> f64 {
        match self {
            Self::Int(v) => f64::from(v),
            Self::Float(v) => f64::from(v),
        }
    }
}

/// `acc + a*b` in exact integer arithmetic. The emulated accumulator is 32
/// bits wide; anything that does not fit is an error, never a wrap.
#[inline]
pub fn mac_int(acc: i32, a: i8, b: i8) -> Result<i32, NumericsError> {
    let product = i32::from(a) * i32::from(b);
    acc.checked_add(product)
        .ok_or(NumericsError::AccumulatorOverflow { acc, product })
}

/// BF16 multiply with FP32 accumulate. The product of two BF16 values has
/// at most 16 significant bits, so widening it to FP32 is exact and the only
/// rounding happens in the add.
#[inline]
pub fn mac_bf16(acc: f32, a: Bf16Value, b: Bf16Value) -> f32 {
    acc + a.to_f32() * b.to_f32()
}
