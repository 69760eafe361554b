use super::NumericsError;

/// 8-bit two's complement fixed point with `frac_bits` bits after the
/// binary point. Q1.6 (`frac_bits = 6`) is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fxp8Format {
    frac_bits: u8,
}

impl Default for Fxp8Format {
    fn default() -> Self {
        Self { frac_bits: 6 }
    }
}

impl Fxp8Format {
    pub fn new(frac_bits: u8) -> Result<Self, NumericsError> {
        if frac_bits > 7 {
            return Err(NumericsError::InvalidFracBits(frac_bits));
        }
        Ok(Self { frac_bits })
    }

    pub fn frac_bits(self) -> u8 {
        self.frac_bits
    }

    /// Value of one least-significant bit.
    pub fn step(self) -> f64 {
        (-f64::from(self.frac_bits)).exp2()
    }

    pub fn min_value(self) -> f64 {
        -128.0 * self.step()
    }

    pub fn max_value(self) -> f64 {
        127.0 * self.step()
    }

    /// Largest `frac_bits` whose range still covers `magnitude`, or 0 when
    /// nothing does.
    pub fn covering(magnitude: f64) -> Self {
        (0..=7u8)
            .rev()
            .map(|f| Self { frac_bits: f })
            .find(|fmt| fmt.max_value() >= magnitude)
            .unwrap_or(Self { frac_bits: 0 })
    }
}

/// Encode with round-half-to-even and saturation. Non-finite inputs map
/// to 0.
#[inline]
pub fn fxp8_encode(x: f32, fmt: Fxp8Format) -> i8 {
    fxp8_encode_checked(x, fmt).0
}

/// As [`fxp8_encode`], also reporting whether the input was non-finite.
#[inline]
pub fn fxp8_encode_checked(x: f32, fmt: Fxp8Format) -> (i8, bool) {
    if !x.is_finite() {
        return (0, true);
    }
    let scaled = (f64::from(x) * f64::from(1u32 << fmt.frac_bits)).round_ties_even();
    (scaled.clamp(-128.0, 127.0) as i8, false)
}

#[inline]
pub fn fxp8_decode(code: i8, fmt: Fxp8Format) -> f32 {
    // |code| <= 128 and the scale is a power of two, so this is exact
    f32::from(code) * (-f32::from(fmt.frac_bits)).exp2()
}
