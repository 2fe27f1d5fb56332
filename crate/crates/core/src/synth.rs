//! Parametric test-signal generation: Hi-Lo sirens, steady tones, white
//! noise, and linear sweeps, all deterministic under a fixed seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::audio::AudioBuffer;

const TAU: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("frequency {freq} Hz at or above Nyquist ({nyquist} Hz)")]
    NyquistViolation { freq: f64, nyquist: f64 },
    #[error("invalid signal spec: {0}")]
    InvalidSpec(String),
}

/// A zeroed span of the output, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub position: f64,
    pub length: f64,
}

/// Parameters of a synthetic Hi-Lo siren.
#[derive(Debug, Clone, PartialEq)]
pub struct SirenSpec {
    pub f_hi: f64,
    pub f_lo: f64,
    /// Seconds spent on each tone phase.
    pub dwell: f64,
    /// Full hi+lo alternations.
    pub cycles: usize,
    pub amplitude: f64,
    /// Signal-to-noise ratio of added white noise, dB; `None` for clean.
    pub noise_snr_db: Option<f64>,
    /// Seed for the noise generator (ignored without `noise_snr_db`).
    pub noise_seed: u64,
    pub dropout: Option<Dropout>,
}

impl SirenSpec {
    pub fn new(f_hi: f64, f_lo: f64, dwell: f64, cycles: usize) -> Self {
        Self {
            f_hi,
            f_lo,
            dwell,
            cycles,
            amplitude: 0.8,
            noise_snr_db: None,
            noise_seed: 0,
            dropout: None,
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_noise(mut self, snr_db: f64, seed: u64) -> Self {
        self.noise_snr_db = Some(snr_db);
        self.noise_seed = seed;
        self
    }

    pub fn with_dropout(mut self, position: f64, length: f64) -> Self {
        self.dropout = Some(Dropout { position, length });
        self
    }

    fn validate(&self, sample_rate: u32) -> Result<(), SynthError> {
        if !(self.f_hi > self.f_lo && self.f_lo > 0.0) {
            return Err(SynthError::InvalidSpec("need f_hi > f_lo > 0".into()));
        }
        if self.dwell <= 0.0 {
            return Err(SynthError::InvalidSpec("dwell must be positive".into()));
        }
        if self.cycles < 1 {
            return Err(SynthError::InvalidSpec("need at least one cycle".into()));
        }
        if !(0.0..=1.0).contains(&self.amplitude) {
            return Err(SynthError::InvalidSpec("amplitude must be in [0, 1]".into()));
        }
        check_nyquist(self.f_hi, sample_rate)
    }
}

fn check_nyquist(freq: f64, sample_rate: u32) -> Result<(), SynthError> {
    let nyquist = sample_rate as f64 / 2.0;
    if freq >= nyquist {
        return Err(SynthError::NyquistViolation { freq, nyquist });
    }
    Ok(())
}

/// Alternating constant-frequency phases hi, lo, hi, lo, ... with
/// phase-continuous switches. Total duration is `2 * dwell * cycles`.
pub fn gen_siren(spec: &SirenSpec, sample_rate: u32) -> Result<AudioBuffer, SynthError> {
    spec.validate(sample_rate)?;
    let rate = sample_rate as f64;
    let phase_len = (spec.dwell * rate).round() as usize;

    let mut samples = Vec::with_capacity(2 * spec.cycles * phase_len);
    let mut phase = 0.0f64;
    for _ in 0..spec.cycles {
        for freq in [spec.f_hi, spec.f_lo] {
            let step = TAU * freq / rate;
            for _ in 0..phase_len {
                samples.push(spec.amplitude * phase.sin());
                phase = (phase + step) % TAU;
            }
        }
    }

    if let Some(snr_db) = spec.noise_snr_db {
        let rms = root_mean_square(&samples);
        let noise_rms = rms * 10f64.powf(-snr_db / 20.0);
        // U(-1, 1) has rms 1/sqrt(3)
        let scale = noise_rms * 3f64.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
        for s in &mut samples {
            *s += scale * rng.random_range(-1.0..1.0);
        }
    }

    if let Some(d) = spec.dropout {
        let start = ((d.position * rate).round() as usize).min(samples.len());
        let end = (((d.position + d.length) * rate).round() as usize).min(samples.len());
        for s in &mut samples[start..end] {
            *s = 0.0;
        }
    }

    Ok(AudioBuffer::new(samples, sample_rate))
}

/// Pure sine at amplitude 0.8.
pub fn gen_tone(freq: f64, dur: f64, sample_rate: u32) -> Result<AudioBuffer, SynthError> {
    check_nyquist(freq, sample_rate)?;
    check_duration(dur)?;
    let rate = sample_rate as f64;
    let n = (dur * rate).round() as usize;
    let step = TAU * freq / rate;
    Ok(AudioBuffer::new(
        (0..n).map(|i| 0.8 * (step * i as f64).sin()).collect(),
        sample_rate,
    ))
}

/// Seeded uniform white noise at amplitude 0.8.
pub fn gen_noise(dur: f64, sample_rate: u32, seed: u64) -> Result<AudioBuffer, SynthError> {
    check_duration(dur)?;
    let n = (dur * sample_rate as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(AudioBuffer::new(
        (0..n).map(|_| rng.random_range(-0.8..0.8)).collect(),
        sample_rate,
    ))
}

/// Linear chirp from `f_start` to `f_end` at amplitude 0.8.
pub fn gen_sweep(
    f_start: f64,
    f_end: f64,
    dur: f64,
    sample_rate: u32,
) -> Result<AudioBuffer, SynthError> {
    check_nyquist(f_start.max(f_end), sample_rate)?;
    check_duration(dur)?;
    if f_start <= 0.0 || f_end <= 0.0 {
        return Err(SynthError::InvalidSpec("frequencies must be positive".into()));
    }
    let rate = sample_rate as f64;
    let n = (dur * rate).round() as usize;
    let sweep_rate = (f_end - f_start) / dur;
    Ok(AudioBuffer::new(
        (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                0.8 * (TAU * (f_start * t + 0.5 * sweep_rate * t * t)).sin()
            })
            .collect(),
        sample_rate,
    ))
}

fn check_duration(dur: f64) -> Result<(), SynthError> {
    if dur <= 0.0 {
        return Err(SynthError::InvalidSpec("duration must be positive".into()));
    }
    Ok(())
}

fn root_mean_square(samples: &[f64]) -> f64 {
    (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt()
}
