//! Log-mel spectrogram extraction: Hann-windowed STFT, triangular mel
//! filterbank, decibel conversion referenced to the clip maximum.

use rustfft::{num_complex::Complex, FftPlanner};
use thiserror::Error;

use crate::audio::AudioBuffer;

/// Relative power floor applied before the log, as a fraction of the
/// clip's maximum mel-band power. Keeping the floor relative (rather
/// than absolute) makes the max-referenced dB matrix, and everything
/// downstream of it, invariant under input gain.
const POWER_FLOOR_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MelParams {
    pub sample_rate: u32,
    /// Samples per FFT (also the analysis frame length).
    pub n_fft: usize,
    /// Samples between successive frames.
    pub hop: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for MelParams {
    fn default() -> Self {
        Self {
            sample_rate: 22050,
            n_fft: 1024,
            hop: 320,
            n_mels: 64,
            f_min: 20.0,
            f_max: 2560.0,
        }
    }
}

impl MelParams {
    pub fn validate(&self) -> Result<(), MelError> {
        if self.sample_rate == 0 {
            return Err(MelError::InvalidParams("sample_rate must be > 0".into()));
        }
        if self.hop < 1 || self.n_fft < self.hop {
            return Err(MelError::InvalidParams(
                "need n_fft >= hop >= 1".into(),
            ));
        }
        if self.n_mels < 2 {
            return Err(MelError::InvalidParams("need n_mels >= 2".into()));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(0.0 <= self.f_min && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(MelError::InvalidParams(format!(
                "need 0 <= f_min < f_max <= {nyquist} Hz"
            )));
        }
        Ok(())
    }

    /// Seconds of audio each frame advance covers.
    pub fn frame_duration(&self) -> f64 {
        self.hop as f64 / self.sample_rate as f64
    }

    /// Frames produced by an offline clip of `n_samples` samples.
    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.n_fft {
            0
        } else {
            1 + (n_samples - self.n_fft) / self.hop
        }
    }
}

#[derive(Debug, Error)]
pub enum MelError {
    #[error("clip too short: {got} samples, need at least {need}")]
    ClipTooShort { got: usize, need: usize },
    #[error("degenerate mel bank: filter {band} has no FFT bin support")]
    DegenerateBank { band: usize },
    #[error("invalid mel parameters: {0}")]
    InvalidParams(String),
}

/// Symmetric Hann window, `w[k] = 0.5 (1 - cos(2 pi k / (n-1)))`.
pub fn hann_window(n: usize) -> Vec<f64> {
    assert!(n >= 1);
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| {
            0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos())
        })
        .collect()
}

/// Hz to mel, `2595 log10(1 + f/700)`.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

/// Mel to Hz, inverse of [`hz_to_mel`].
pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// One-sided power spectrogram. Row `t` holds `|FFT(hann . frame_t)|^2`
/// over bins `0..=n_fft/2`; frame `t` starts at `t * hop`, no padding.
pub fn power_stft(buf: &AudioBuffer, params: &MelParams) -> Result<Vec<Vec<f64>>, MelError> {
    params.validate()?;
    if buf.sample_rate != params.sample_rate {
        return Err(MelError::InvalidParams(format!(
            "buffer rate {} != params rate {}; resample first",
            buf.sample_rate, params.sample_rate
        )));
    }
    if buf.len() < params.n_fft {
        return Err(MelError::ClipTooShort {
            got: buf.len(),
            need: params.n_fft,
        });
    }

    let n_fft = params.n_fft;
    let window = hann_window(n_fft);
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let n_bins = n_fft / 2 + 1;

    let mut frames = Vec::with_capacity(params.n_frames(buf.len()));
    let mut scratch = vec![Complex::new(0.0, 0.0); n_fft];
    let mut start = 0;
    while start + n_fft <= buf.len() {
        for (i, c) in scratch.iter_mut().enumerate() {
            *c = Complex::new(buf.samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut scratch);
        frames.push(scratch[..n_bins].iter().map(|c| c.norm_sqr()).collect());
        start += params.hop;
    }
    Ok(frames)
}

/// Triangular mel filterbank with centers uniformly spaced on the mel
/// scale between `f_min` and `f_max`.
pub struct MelFilterbank {
    /// Per band: index of its first contributing FFT bin and the weights
    /// of the contiguous nonzero span starting there.
    pub filters: Vec<(usize, Vec<f64>)>,
    /// Peak frequency of each triangle, Hz, strictly increasing.
    pub centers: Vec<f64>,
}

impl MelFilterbank {
    /// Weighted band energies for one power-spectrum frame.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|(first, weights)| {
                weights
                    .iter()
                    .zip(&power[*first..])
                    .map(|(w, p)| w * p)
                    .sum()
            })
            .collect()
    }
}

pub fn mel_filterbank(params: &MelParams) -> Result<MelFilterbank, MelError> {
    params.validate()?;
    let n_bins = params.n_fft / 2 + 1;
    let bin_hz = params.sample_rate as f64 / params.n_fft as f64;

    let mel_lo = hz_to_mel(params.f_min);
    let mel_hi = hz_to_mel(params.f_max);
    let step = (mel_hi - mel_lo) / (params.n_mels + 1) as f64;
    let edges: Vec<f64> = (0..params.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + step * i as f64))
        .collect();

    let mut filters = Vec::with_capacity(params.n_mels);
    for band in 0..params.n_mels {
        let (f_l, f_c, f_r) = (edges[band], edges[band + 1], edges[band + 2]);
        let mut first = None;
        let mut weights = Vec::new();
        for bin in 0..n_bins {
            let f = bin as f64 * bin_hz;
            let w = ((f - f_l) / (f_c - f_l))
                .min((f_r - f) / (f_r - f_c))
                .max(0.0);
            if w > 0.0 {
                if first.is_none() {
                    first = Some(bin);
                }
                weights.push(w);
            } else if first.is_some() {
                break; // past the triangle's support
            }
        }
        match first {
            Some(first) => filters.push((first, weights)),
            None => return Err(MelError::DegenerateBank { band }),
        }
    }

    Ok(MelFilterbank {
        filters,
        centers: edges[1..=params.n_mels].to_vec(),
    })
}

/// Mel-band spectrogram in decibels, shifted so the matrix maximum is 0 dB.
#[derive(Debug, Clone)]
pub struct LogMelSpectrogram {
    /// `values[band][frame]`, bands ascending in frequency.
    pub values: Vec<Vec<f64>>,
    /// Center frequency of each band, Hz.
    pub band_centers: Vec<f64>,
    /// Seconds per frame advance.
    pub frame_duration: f64,
    pub params: MelParams,
}

impl LogMelSpectrogram {
    pub fn n_bands(&self) -> usize {
        self.values.len()
    }

    pub fn n_frames(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Matrix as CSV: one row per band, low to high, 3-decimal dB values.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.values {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Compute the log-mel spectrogram of a clip.
pub fn log_mel(buf: &AudioBuffer, params: &MelParams) -> Result<LogMelSpectrogram, MelError> {
    let bank = mel_filterbank(params)?;
    let stft = power_stft(buf, params)?;
    let n_frames = stft.len();

    let mut values = vec![vec![0.0; n_frames]; params.n_mels];
    let mut max_power = 0.0f64;
    for (t, frame) in stft.iter().enumerate() {
        for (band, energy) in bank.apply(frame).into_iter().enumerate() {
            values[band][t] = energy;
            max_power = max_power.max(energy);
        }
    }

    if max_power > 0.0 {
        let floor = max_power * POWER_FLOOR_RATIO;
        let ref_db = 10.0 * max_power.log10();
        for row in &mut values {
            for v in row {
                *v = 10.0 * v.max(floor).log10() - ref_db;
            }
        }
    }
    // an all-silent clip stays identically 0 dB after the shift

    Ok(LogMelSpectrogram {
        values,
        band_centers: bank.centers,
        frame_duration: params.frame_duration(),
        params: params.clone(),
    })
}
