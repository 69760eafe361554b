//! Model container, little-endian:
//!
//! ```text
//! "S8UV"  u16 version=1  u16 layer_count
//! per layer:
//!   u8 kind tag, u8 precision tag
//!   shape fields (u32 each, count fixed by kind)
//!   f32 k, f32 W_l, f32 W_h, f32 alpha, u8 n, u8 frac_bits
//!   weights then bias as raw f32 (conv/dense only)
//! u32 CRC32 of all preceding bytes
//! ```
//!
//! Kind tags and their shape fields: 0 input `[channels, length]`,
//! 1 conv1d `[in_ch, out_ch, kernel=3, stride=1, padding (0 valid, 1 same)]`,
//! 2 relu, 3 maxpool `[window=2, stride=2]`, 4 dropout `[rate as f32 bits]`,
//! 5 flatten, 6 dense `[in_dim, out_dim]`, 7 softmax.

use std::fs;
use std::path::Path;

use super::{Layer, LayerSpec, ModelSpec, Padding, QuantParams, CONV_KERNEL, POOL_WINDOW};
use crate::format::{decode_with_crc, ByteReader, ByteWriter, FormatError};
use crate::numerics::PrecisionKind;

pub const MODEL_MAGIC: [u8; 4] = *b"S8UV";
pub const MODEL_VERSION: u16 = 1;

fn kind_tag(spec: &LayerSpec) -> u8 {
    match spec {
        LayerSpec::Input { .. } => 0,
        LayerSpec::Conv1D { .. } => 1,
        LayerSpec::ReLU => 2,
        LayerSpec::MaxPool1D => 3,
        LayerSpec::Dropout { .. } => 4,
        LayerSpec::Flatten => 5,
        LayerSpec::Dense { .. } => 6,
        LayerSpec::Softmax => 7,
    }
}

fn shape_fields(spec: &LayerSpec) -> Vec<u32> {
    let u = |v: usize| v as u32;
    match *spec {
        LayerSpec::Input { channels, length } => vec![u(channels), u(length)],
        LayerSpec::Conv1D { in_ch, out_ch, padding } => vec![
            u(in_ch),
            u(out_ch),
            CONV_KERNEL as u32,
            1,
            match padding {
                Padding::Valid => 0,
                Padding::Same => 1,
            },
        ],
        LayerSpec::MaxPool1D => vec![POOL_WINDOW as u32, POOL_WINDOW as u32],
        LayerSpec::Dropout { rate } => vec![rate.to_bits()],
        LayerSpec::Dense { in_dim, out_dim } => vec![u(in_dim), u(out_dim)],
        LayerSpec::ReLU | LayerSpec::Flatten | LayerSpec::Softmax => vec![],
    }
}

/// Serialize a model to bytes.
pub fn write_model(m: &ModelSpec) -> Result<Vec<u8>, FormatError> {
    let count = u16::try_from(m.layers.len())
        .map_err(|_| FormatError::Invalid(format!("{} layers exceed the u16 count", m.layers.len())))?;
    let mut w = ByteWriter::new();
    w.bytes(&MODEL_MAGIC);
    w.u16(MODEL_VERSION);
    w.u16(count);
    for layer in &m.layers {
        w.u8(kind_tag(&layer.spec));
        w.u8(layer.precision.tag());
        for f in shape_fields(&layer.spec) {
            w.u32(f);
        }
        let q = &layer.quant;
        w.f32(q.scale);
        w.f32(q.w_lo);
        w.f32(q.w_hi);
        w.f32(q.alpha);
        w.u8(q.bits);
        w.u8(q.frac_bits);
        w.f32_slice(&layer.weights);
        w.f32_slice(&layer.bias);
    }
    Ok(w.finish())
}

fn read_layer(r: &mut ByteReader<'_>) -> Result<Layer, FormatError> {
    let kind = r.u8()?;
    let ptag = r.u8()?;
    let precision = PrecisionKind::from_tag(ptag)
        .ok_or_else(|| FormatError::Invalid(format!("unknown precision tag {ptag}")))?;
    let mut fields = |n: usize| -> Result<Vec<usize>, FormatError> {
        (0..n).map(|_| r.u32().map(|v| v as usize)).collect()
    };
    let spec = match kind {
        0 => {
            let f = fields(2)?;
            LayerSpec::Input { channels: f[0], length: f[1] }
        }
        1 => {
            let f = fields(5)?;
            if f[2] != CONV_KERNEL || f[3] != 1 {
                return Err(FormatError::Invalid(format!(
                    "conv1d kernel {} stride {} unsupported (only 3 / 1)",
                    f[2], f[3]
                )));
            }
            let padding = match f[4] {
                0 => Padding::Valid,
                1 => Padding::Same,
                p => return Err(FormatError::Invalid(format!("unknown padding tag {p}"))),
            };
            LayerSpec::Conv1D { in_ch: f[0], out_ch: f[1], padding }
        }
        2 => LayerSpec::ReLU,
        3 => {
            let f = fields(2)?;
            if f != [POOL_WINDOW, POOL_WINDOW] {
                return Err(FormatError::Invalid(format!("maxpool {f:?} unsupported (only 2 / 2)")));
            }
            LayerSpec::MaxPool1D
        }
        4 => LayerSpec::Dropout { rate: f32::from_bits(r.u32()?) },
        5 => LayerSpec::Flatten,
        6 => {
            let f = fields(2)?;
            LayerSpec::Dense { in_dim: f[0], out_dim: f[1] }
        }
        7 => LayerSpec::Softmax,
        t => return Err(FormatError::Invalid(format!("unknown layer kind tag {t}"))),
    };
    let quant = QuantParams {
        scale: r.f32()?,
        w_lo: r.f32()?,
        w_hi: r.f32()?,
        alpha: r.f32()?,
        bits: r.u8()?,
        frac_bits: r.u8()?,
    };
    let (nw, nb) = spec.param_counts();
    let weights = r.f32_vec(nw)?;
    let bias = r.f32_vec(nb)?;
    Ok(Layer { spec, precision, quant, weights, bias })
}

/// Parse a model from bytes.
pub fn read_model(bytes: &[u8]) -> Result<ModelSpec, FormatError> {
    let layers = decode_with_crc(bytes, MODEL_MAGIC, |r| {
        let version = r.u16()?;
        if version != MODEL_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let count = r.u16()?;
        (0..count).map(|_| read_layer(r)).collect::<Result<Vec<_>, _>>()
    })?;
    ModelSpec::new(layers).map_err(|e| FormatError::Invalid(e.to_string()))
}

pub fn save_model(m: &ModelSpec, path: impl AsRef<Path>) -> Result<(), FormatError> {
    fs::write(path, write_model(m)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelSpec, FormatError> {
    read_model(&fs::read(path)?)
}
