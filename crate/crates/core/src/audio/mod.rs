//! Audio ingestion: WAV decode/encode, resampling, and stream framing.

mod framer;
mod resample;
mod wav;

pub use framer::{frames, Framer};
pub use resample::resample;
pub use wav::{decode_wav, encode_wav, SampleFormat};

use thiserror::Error;

/// Mono PCM audio at a known sample rate.
///
/// Decoding normalizes samples into [-1.0, 1.0] by the source format's
/// full-scale value; the synthesizers keep them in range by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample_rate must be positive");
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Copy with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

#[derive(Debug, Error)]
pub enum AudioError {
    /// Bad RIFF magic, truncated chunks, or inconsistent sizes.
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    /// A codec or layout this decoder does not handle.
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
}
