//! Hyperbolic CORDIC, the shift-add core of the activation unit.
//!
//! Rotation mode drives the residual angle `z` to zero with micro-rotations
//! by `atanh(2^-i)`. Shift indices 4, 13, 40, ... (each `3k+1` from the
//! previous) are executed twice, which is what makes the hyperbolic
//! iteration converge. The datapath is emulated in f64, wider than any
//! value it hands back.

use super::NumericsError;

pub const MIN_CORDIC_ITERS: u32 = 4;
pub const DEFAULT_CORDIC_ITERS: u32 = 16;

/// Arguments up to this magnitude go straight to the rotation core; larger
/// ones are halved first. Sits under the convergence bound even for the
/// shortest allowed schedule (`sum atanh(2^-i), i = 1..4 ~ 0.993`).
const DIRECT_LIMIT: f64 = 0.99;

/// Shift index of each micro-rotation, repeats included.
fn shift_schedule(iters: u32) -> impl Iterator<Item = u32> {
    let mut shift = 1u32;
    let mut next_repeat = 4u32;
    let mut repeating = false;
    (0..iters).map(move |_| {
        let s = shift;
        if s == next_repeat && !repeating {
            repeating = true;
        } else {
            if s == next_repeat {
                next_repeat = 3 * next_repeat + 1;
            }
            repeating = false;
            shift += 1;
        }
        s
    })
}

fn check_iters(iters: u32) -> Result<(), NumericsError> {
    if iters < MIN_CORDIC_ITERS {
        return Err(NumericsError::IterationCountTooSmall { got: iters, min: MIN_CORDIC_ITERS });
    }
    Ok(())
}

/// Rotation core for `|z| <= DIRECT_LIMIT`.
fn rotate(z: f64, iters: u32) -> (f64, f64) {
    let mut gain = 1.0f64;
    for s in shift_schedule(iters) {
        let t = (-f64::from(s)).exp2();
        gain *= (1.0 - t * t).sqrt();
    }
    let (mut x, mut y, mut r) = (1.0 / gain, 0.0f64, z);
    for s in shift_schedule(iters) {
        let t = (-f64::from(s)).exp2();
        let d = if r >= 0.0 { 1.0 } else { -1.0 };
        let (nx, ny) = (x + d * y * t, y + d * x * t);
        x = nx;
        y = ny;
        r -= d * t.atanh();
    }
    (x, y)
}

fn hyperbolic_wide(z: f64, iters: u32) -> (f64, f64) {
    if !z.is_finite() {
        return if z.is_nan() { (f64::NAN, f64::NAN) } else { (f64::INFINITY, z) };
    }
    let mut halvings = 0u32;
    let mut r = z;
    while r.abs() > DIRECT_LIMIT {
        r *= 0.5;
        halvings += 1;
    }
    let (mut c, mut s) = rotate(r, iters);
    for _ in 0..halvings {
        let (c2, s2) = (c * c + s * s, 2.0 * s * c);
        c = c2;
        s = s2;
    }
    (c, s)
}

/// Approximate `(cosh z, sinh z)`. Arguments outside the convergence range
/// are halved until they fit and the result is rebuilt with the doubling
/// identities.
pub fn cordic_hyperbolic(z: f32, iters: u32) -> Result<(f32, f32), NumericsError> {
    check_iters(iters)?;
    let (c, s) = hyperbolic_wide(f64::from(z), iters);
    Ok((c as f32, s as f32))
}

fn tanh_wide(z: f64, iters: u32) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z.is_infinite() {
        return z.signum();
    }
    if z == 0.0 {
        // odd function: the rotation core would leave a residual of one
        // micro-angle here
        return z;
    }
    let mut halvings = 0u32;
    let mut r = z;
    while r.abs() > DIRECT_LIMIT {
        r *= 0.5;
        halvings += 1;
    }
    let (c, s) = rotate(r, iters);
    let mut t = s / c;
    // tanh(2u) = 2 tanh(u) / (1 + tanh^2(u))
    for _ in 0..halvings {
        t = 2.0 * t / (1.0 + t * t);
    }
    t.clamp(-1.0, 1.0)
}

pub fn cordic_tanh(z: f32, iters: u32) -> Result<f32, NumericsError> {
    check_iters(iters)?;
    Ok(tanh_wide(f64::from(z), iters) as f32)
}

/// `sigmoid(z) = (1 + tanh(z/2)) / 2`.
pub fn cordic_sigmoid(z: f32, iters: u32) -> Result<f32, NumericsError> {
    check_iters(iters)?;
    let t = tanh_wide(f64::from(z) * 0.5, iters);
    Ok((0.5 * (1.0 + t)).clamp(0.0, 1.0) as f32)
}

/// `exp(z) = 2^m * (cosh r + sinh r)` with `z = m ln2 + r`, `|r| <= ln2/2`.
pub fn cordic_exp(z: f32, iters: u32) -> Result<f32, NumericsError> {
    check_iters(iters)?;
    let zw = f64::from(z);
    if zw.is_nan() {
        return Ok(f32::NAN);
    }
    if zw == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if zw == f64::INFINITY {
        return Ok(f32::INFINITY);
    }
    let m = (zw / std::f64::consts::LN_2).round();
    let r = zw - m * std::f64::consts::LN_2;
    let (c, s) = rotate(r, iters);
    // clamp the exponent so powi cannot overflow its argument
    let m = m.clamp(-2000.0, 2000.0) as i32;
    Ok(((c + s) * 2f64.powi(m)) as f32)
}
