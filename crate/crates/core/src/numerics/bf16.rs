use std::fmt;

/// Brain floating point: 1 sign bit, 8 exponent bits, 7 mantissa bits.
///
/// Stored as the raw pattern. Widening to `f32` appends 16 zero mantissa
/// bits and is exact.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Bf16Value(u16);

const QUIET_BIT: u16 = 0x0040;

impl Bf16Value {
    pub const ZERO: Self = Self(0x0000);
    pub const ONE: Self = Self(0x3F80);
    pub const INFINITY: Self = Self(0x7F80);
    pub const NEG_INFINITY: Self = Self(0xFF80);

    #[inline]
    pub const fn from_bits(bits: u16) -> Self {
        Self(bits)
    }

    #[inline]
    pub const fn to_bits(self) -> u16 {
        self.0
    }

    #[inline]
    pub fn from_f32(x: f32) -> Self {
        fp32_to_bf16(x)
    }

    #[inline]
    pub fn to_f32(self) -> f32 {
        bf16_to_fp32(self)
    }

    #[inline]
    pub const fn is_nan(self) -> bool {
        (self.0 & 0x7F80) == 0x7F80 && (self.0 & 0x007F) != 0
    }
}

impl fmt::Debug for Bf16Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bf16Value({:#06x} = {})", self.0, self.to_f32())
    }
}

impl fmt::Display for Bf16Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f32(), f)
    }
}

/// Narrow with round-to-nearest-even on the 16 dropped mantissa bits.
///
/// NaN becomes a quiet NaN with the sign kept; finite values that round
/// past the largest BF16 magnitude become infinity.
#[inline]
pub fn fp32_to_bf16(x: f32) -> Bf16Value {
    let bits = x.to_bits();
    if x.is_nan() {
        return Bf16Value(((bits >> 16) as u16) | QUIET_BIT);
    }
    let lsb = (bits >> 16) & 1;
    let rounded = bits.wrapping_add(0x7FFF + lsb);
    Bf16Value((rounded >> 16) as u16)
}

#[inline]
pub fn bf16_to_fp32(b: Bf16Value) -> f32 {
    f32::from_bits(u32::from(b.0) << 16)
}

/// Round an `f32` onto the BF16 grid and widen it back.
#[inline]
pub fn narrow(x: f32) -> f32 {
    bf16_to_fp32(fp32_to_bf16(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference rounding: picks the nearer of the two BF16 neighbours by
    /// exact f64 distance, breaking ties toward the even pattern.
    fn oracle(x: f32) -> u16 {
        let bits = x.to_bits();
        let down = (bits >> 16) as u16;
        let up = down.wrapping_add(1);
        let lo = f64::from(f32::from_bits(u32::from(down) << 16));
        let mut hi = f64::from(f32::from_bits(u32::from(up) << 16));
        if hi.is_infinite() {
            // the overflow threshold behaves like the next grid point 2^128
            hi = hi.signum() * 2f64.powi(128);
        }
        let xv = f64::from(x);
        let (dl, dh) = ((xv - lo).abs(), (hi - xv).abs());
        if dl < dh {
            down
        } else if dh < dl {
            up
        } else if down & 1 == 0 {
            down
        } else {
            up
        }
    }

    #[test]
    fn exact_and_signed_zero() {
        assert_eq!(fp32_to_bf16(1.0), Bf16Value::ONE);
        assert_eq!(fp32_to_bf16(0.0).to_bits(), 0x0000);
        assert_eq!(fp32_to_bf16(-0.0).to_bits(), 0x8000);
        assert_eq!(bf16_to_fp32(Bf16Value::ONE), 1.0);
        assert!(bf16_to_fp32(Bf16Value::from_bits(0x8000)).is_sign_negative());
    }

    #[test]
    fn midpoint_rounds_to_even() {
        // 1 + 2^-8 sits halfway between 1.0 and 1 + 2^-7.
        let mid = 1.0f32 + 2f32.powi(-8);
        assert_eq!(fp32_to_bf16(mid).to_bits(), oracle(mid));
        assert_eq!(fp32_to_bf16(mid), Bf16Value::ONE);
        // 1 + 3*2^-8 sits halfway between odd 1+2^-7 and even 1+2^-6.
        let mid_odd = 1.0f32 + 3.0 * 2f32.powi(-8);
        assert_eq!(fp32_to_bf16(mid_odd).to_f32(), 1.0 + 2f32.powi(-6));
    }

    #[test]
    fn specials() {
        assert_eq!(fp32_to_bf16(f32::INFINITY), Bf16Value::INFINITY);
        assert_eq!(fp32_to_bf16(f32::NEG_INFINITY), Bf16Value::NEG_INFINITY);
        assert!(fp32_to_bf16(f32::NAN).is_nan());
        assert_eq!(fp32_to_bf16(f32::MAX), Bf16Value::INFINITY);
        // a NaN whose payload lives only in the low half must stay NaN
        let low_payload = f32::from_bits(0x7F80_0001);
        assert!(fp32_to_bf16(low_payload).is_nan());
    }

    #[test]
    fn exhaustive_neighbourhoods_match_oracle() {
        // every upper half, with low halves at the interesting offsets
        for hi in 0..=u16::MAX {
            for lo in [0x0000u32, 0x0001, 0x7FFF, 0x8000, 0x8001, 0xFFFF] {
                let x = f32::from_bits((u32::from(hi) << 16) | lo);
                if x.is_nan() || x.is_infinite() {
                    continue;
                }
                let got = fp32_to_bf16(x).to_bits();
                let want = oracle(x);
                assert_eq!(got, want, "x bits {:#010x}", x.to_bits());
            }
        }
    }

    proptest! {
        #[test]
        fn half_ulp_bound(x in proptest::num::f32::NORMAL) {
            let b = fp32_to_bf16(x).to_f32();
            prop_assume!(b.is_finite());
            let ulp_half = 2f64.powi(-8) * 2f64.powi(f64::from(x.abs()).log2().floor() as i32);
            prop_assert!((f64::from(b) - f64::from(x)).abs() <= ulp_half);
        }
    }
}
