//! Little-endian binary helpers shared by the model container and the
//! feature dataset file. Both formats end with a CRC32 of every byte before
//! it.

use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("file truncated: needed {needed} more bytes at offset {offset}")]
    TruncatedFile { offset: usize, needed: usize },
    #[error("{extra} unexpected bytes after the last record")]
    TrailingBytes { extra: usize },
    #[error("invalid content: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32_slice(&mut self, vs: &[f32]) {
        self.buf.reserve(vs.len() * 4);
        for v in vs {
            self.f32(*v);
        }
    }

    /// Append the CRC32 of everything written so far and return the bytes.
    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

/// Cursor over a payload (the file minus its trailing CRC).
pub struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::TruncatedFile { offset: self.pos, needed: n - self.remaining() });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>, FormatError> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| {
            FormatError::Invalid(format!("tensor length {n} overflows"))
        })?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn finish(self) -> Result<(), FormatError> {
        if self.remaining() != 0 {
            return Err(FormatError::TrailingBytes { extra: self.remaining() });
        }
        Ok(())
    }
}

/// Check the magic, split off the CRC and run `parse` on the payload.
///
/// A file whose CRC matches is parsed directly. When the CRC does not match
/// the payload is still parsed: running out of bytes is reported as
/// truncation, anything else as a checksum mismatch.
pub fn decode_with_crc<T>(
    bytes: &[u8],
    magic: [u8; 4],
    parse: impl Fn(&mut ByteReader<'_>) -> Result<T, FormatError>,
) -> Result<T, FormatError> {
    let head = &bytes[..bytes.len().min(4)];
    if head != magic {
        if head.len() < 4 && magic.starts_with(head) {
            return Err(FormatError::TruncatedFile { offset: head.len(), needed: 4 - head.len() });
        }
        return Err(FormatError::BadMagic { expected: magic, found: head.to_vec() });
    }
    if bytes.len() < 8 {
        return Err(FormatError::TruncatedFile { offset: bytes.len(), needed: 8 - bytes.len() });
    }
    let (payload, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let computed = crc32fast::hash(payload);
    let run = || {
        let mut r = ByteReader::new(payload);
        r.take(4)?;
        let v = parse(&mut r)?;
        r.finish()?;
        Ok(v)
    };
    if stored == computed {
        return run();
    }
    match run() {
        Err(e @ FormatError::TruncatedFile { .. }) => Err(e),
        Err(FormatError::UnsupportedVersion(v)) => Err(FormatError::UnsupportedVersion(v)),
        _ => Err(FormatError::ChecksumMismatch { stored, computed }),
    }
}
