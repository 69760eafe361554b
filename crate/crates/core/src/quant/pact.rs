use super::{levels, QuantError};

/// PACT activation quantizer: clip to `[0, alpha]`, then `bits`-bit codes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PactParams {
    pub alpha: f32,
    pub bits: u8,
}

impl PactParams {
    pub fn new(alpha: f32, bits: u8) -> Result<Self, QuantError> {
        let p = Self { alpha, bits };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), QuantError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(QuantError::InvalidAlpha(self.alpha));
        }
        if !(2..=16).contains(&self.bits) {
            return Err(QuantError::InvalidBitWidth(self.bits));
        }
        Ok(())
    }

    /// Value of one code, `alpha / (2^n - 1)`.
    pub fn step(&self) -> f64 {
        f64::from(self.alpha) / levels(self.bits)
    }
}

/// `0.5 * (|x| - |x - alpha| + alpha)`.
///
/// Evaluated in its closed form `min(max(x, 0), alpha)`, which is exact for
/// every input; the absolute-value form loses bits when `x` and `alpha`
/// differ by many binades.
pub fn pact_clip(x: f32, alpha: f32) -> Result<f32, QuantError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(QuantError::InvalidAlpha(alpha));
    }
    Ok(x.max(0.0).min(alpha))
}

/// `(code, code * alpha / (2^n - 1))` with `code = round(clip(x) * (2^n - 1) / alpha)`.
/// Non-finite inputs map to code 0.
pub fn pact_quantize(x: f32, p: &PactParams) -> Result<(u32, f32), QuantError> {
    p.validate()?;
    if !x.is_finite() {
        return Ok((0, 0.0));
    }
    let y = f64::from(pact_clip(x, p.alpha)?);
    let code = (y * levels(p.bits) / f64::from(p.alpha)).round_ties_even() as u32;
    Ok((code, (f64::from(code) * p.step()) as f32))
}

/// Symmetric variant for inputs that can be negative (a network input not
/// preceded by a rectifier): clip to `[-alpha, alpha]` and use signed codes
/// in `[-(2^(n-1) - 1), 2^(n-1) - 1]`. Non-finite inputs map to 0.
pub fn quantize_signed_activation(x: f32, p: &PactParams) -> Result<i32, QuantError> {
    p.validate()?;
    if !x.is_finite() {
        return Ok(0);
    }
    let half = f64::from((1u32 << (p.bits - 1)) - 1);
    let a = f64::from(p.alpha);
    Ok((f64::from(x).clamp(-a, a) * half / a).round_ties_even() as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p8(alpha: f32) -> PactParams {
        PactParams::new(alpha, 8).unwrap()
    }

    #[test]
    fn clip_examples() {
        assert_eq!(pact_clip(-1.0, 1.0).unwrap(), 0.0);
        assert_eq!(pact_clip(0.5, 1.0).unwrap(), 0.5);
        assert_eq!(pact_clip(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(pact_clip(0.5, 0.0), Err(QuantError::InvalidAlpha(0.0)));
        assert_eq!(pact_clip(0.5, -1.0), Err(QuantError::InvalidAlpha(-1.0)));
    }

    #[test]
    fn absolute_value_form_agrees_on_grid() {
        for alpha in [0.25f32, 1.0, 3.5, 6.0] {
            for i in 0..=10_000 {
                let x = -2.0 * alpha + 4.0 * alpha * (i as f32) / 10_000.0;
                let (xd, ad) = (f64::from(x), f64::from(alpha));
                let formula = 0.5 * (xd.abs() - (xd - ad).abs() + ad);
                assert_eq!(f64::from(pact_clip(x, alpha).unwrap()), formula, "x={x} alpha={alpha}");
            }
        }
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(pact_quantize(0.0, &p8(1.0)).unwrap(), (0, 0.0));
        assert_eq!(pact_quantize(5.0, &p8(2.0)).unwrap(), (255, 2.0));
        let (code, value) = pact_quantize(0.5, &p8(1.0)).unwrap();
        assert_eq!(code, 128);
        assert!((f64::from(value) - 128.0 / 255.0).abs() < 1e-7);
        assert_eq!(pact_quantize(f32::NAN, &p8(1.0)).unwrap(), (0, 0.0));
        assert!(matches!(
            pact_quantize(1.0, &PactParams { alpha: 0.0, bits: 8 }),
            Err(QuantError::InvalidAlpha(_))
        ));
    }

    #[test]
    fn signed_activation_codes() {
        let p = p8(2.0);
        assert_eq!(quantize_signed_activation(2.0, &p).unwrap(), 127);
        assert_eq!(quantize_signed_activation(-9.0, &p).unwrap(), -127);
        assert_eq!(quantize_signed_activation(0.0, &p).unwrap(), 0);
        assert_eq!(quantize_signed_activation(1.0, &p).unwrap(), 64); // 63.5 -> 64
    }

    proptest! {
        #[test]
        fn codomain_and_monotonicity(alpha in 0.01f32..10.0, a in -20.0f32..20.0, b in -20.0f32..20.0) {
            let p = p8(alpha);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (_, vlo) = pact_quantize(lo, &p).unwrap();
            let (_, vhi) = pact_quantize(hi, &p).unwrap();
            prop_assert!((0.0..=alpha).contains(&vlo));
            prop_assert!((0.0..=alpha).contains(&vhi));
            prop_assert!(vlo <= vhi);
        }
    }
}
