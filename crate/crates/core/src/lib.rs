//! Real-time Hi-Lo siren detection from audio.
//!
//! The pipeline decodes (or synthesizes) mono PCM, computes a log-mel
//! spectrogram, reduces the band of interest to a per-frame dominant
//! tone, symbolizes that track into a string over {a, b, -}, repairs
//! short dropouts, searches for cyclic two-tone patterns, and accepts
//! only candidates whose phase lengths are regular. An evaluation layer
//! scores labeled corpora with confusion-matrix and signal-detection
//! metrics.

pub mod audio;
pub mod config;
pub mod detect;
pub mod eval;
pub mod mel;
pub mod symbol;
pub mod synth;

pub use audio::{AudioBuffer, AudioError};
pub use detect::{
    detect, detect_traced, DetectError, DetectionResult, DetectorConfig, RejectReason, SirenEvent,
    StreamDetector,
};
pub use mel::{log_mel, LogMelSpectrogram, MelParams};
