use super::NnError;

/// `channels x length` activations, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor1D {
    channels: usize,
    length: usize,
    data: Vec<f32>,
}

impl Tensor1D {
    pub fn new(channels: usize, length: usize, data: Vec<f32>) -> Result<Self, NnError> {
        if channels == 0 || length == 0 {
            return Err(NnError::ShapeMismatch(format!(
                "tensor dimensions must be positive, got {channels}x{length}"
            )));
        }
        if data.len() != channels * length {
            return Err(NnError::ShapeMismatch(format!(
                "{channels}x{length} tensor needs {} values, got {}",
                channels * length,
                data.len()
            )));
        }
        Ok(Self { channels, length, data })
    }

    /// Single-channel tensor.
    pub fn from_vec(data: Vec<f32>) -> Result<Self, NnError> {
        let n = data.len();
        Self::new(1, n, data)
    }

    pub fn zeros(channels: usize, length: usize) -> Self {
        Self { channels, length, data: vec![0.0; channels * length] }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.length)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, c: usize) -> &[f32] {
        &self.data[c * self.length..(c + 1) * self.length]
    }

    pub fn get(&self, c: usize, i: usize) -> f32 {
        self.data[c * self.length + i]
    }

    pub(crate) fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self { channels: self.channels, length: self.length, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Bitwise equality, so NaNs with the same payload compare equal.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.shape() == other.shape()
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}
