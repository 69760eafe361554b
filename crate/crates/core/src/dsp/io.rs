//! WAV input (16-bit PCM mono) and the `S8FV` feature dataset file.

use std::fs;
use std::path::Path;

use super::{DspError, FeatureKind};
use crate::format::{decode_with_crc, ByteWriter, FormatError};

/// Read a 16-bit mono WAV as samples in `[-1, 1)`. A rate different from
/// `expected_rate` is an error.
pub fn read_wav(path: impl AsRef<Path>, expected_rate: Option<u32>) -> Result<(Vec<f32>, u32), DspError> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(DspError::UnsupportedWav(format!(
            "{} channel(s), {}-bit {:?}; only 16-bit PCM mono is read",
            spec.channels, spec.bits_per_sample, spec.sample_format
        )));
    }
    if let Some(expected) = expected_rate {
        if spec.sample_rate != expected {
            return Err(DspError::RateMismatch { expected, found: spec.sample_rate });
        }
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| f32::from(v) / 32_768.0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((samples, spec.sample_rate))
}

/// Write samples as 16-bit mono PCM, clamped to the i16 range.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f32], rate: u32) -> Result<(), DspError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        w.write_sample((f64::from(s) * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16)?;
    }
    w.finalize()?;
    Ok(())
}

pub const FEATURE_MAGIC: [u8; 4] = *b"S8FV";
pub const FEATURE_VERSION: u16 = 1;

/// Labelled fixed-length records of one feature kind. Label 1 is UAV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub kind: FeatureKind,
    pub record_len: usize,
    pub records: Vec<(Vec<f32>, u8)>,
}

impl FeatureSet {
    pub fn new(kind: FeatureKind, record_len: usize) -> Self {
        Self { kind, record_len, records: Vec::new() }
    }

    pub fn push(&mut self, values: Vec<f32>, label: u8) -> Result<(), FormatError> {
        if values.len() != self.record_len {
            return Err(FormatError::Invalid(format!(
                "record of {} values in a set of length {}",
                values.len(),
                self.record_len
            )));
        }
        if label > 1 {
            return Err(FormatError::Invalid(format!("label {label} is not 0 or 1")));
        }
        self.records.push((values, label));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn write_features(set: &FeatureSet) -> Result<Vec<u8>, FormatError> {
    let len = u32::try_from(set.record_len).map_err(|_| FormatError::Invalid("record length exceeds u32".into()))?;
    let count = u32::try_from(set.records.len()).map_err(|_| FormatError::Invalid("record count exceeds u32".into()))?;
    let mut w = ByteWriter::new();
    w.bytes(&FEATURE_MAGIC);
    w.u16(FEATURE_VERSION);
    w.u8(set.kind.tag());
    w.u32(len);
    w.u32(count);
    for (values, label) in &set.records {
        if values.len() != set.record_len {
            return Err(FormatError::Invalid(format!("record of {} values, expected {}", values.len(), set.record_len)));
        }
        w.f32_slice(values);
        w.u8(*label);
    }
    Ok(w.finish())
}

pub fn read_features(bytes: &[u8]) -> Result<FeatureSet, FormatError> {
    decode_with_crc(bytes, FEATURE_MAGIC, |r| {
        let version = r.u16()?;
        if version != FEATURE_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let tag = r.u8()?;
        let kind = FeatureKind::from_tag(tag).ok_or_else(|| FormatError::Invalid(format!("unknown feature kind tag {tag}")))?;
        let record_len = r.u32()? as usize;
        let count = r.u32()? as usize;
        let mut set = FeatureSet::new(kind, record_len);
        for _ in 0..count {
            let values = r.f32_vec(record_len)?;
            let label = r.u8()?;
            set.push(values, label)?;
        }
        Ok(set)
    })
}

pub fn save_features(set: &FeatureSet, path: impl AsRef<Path>) -> Result<(), FormatError> {
    fs::write(path, write_features(set)?)?;
    Ok(())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureSet, FormatError> {
    read_features(&fs::read(path)?)
}
