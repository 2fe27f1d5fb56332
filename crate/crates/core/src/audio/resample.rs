//! Band-limited sample-rate conversion with a windowed-sinc kernel.

use super::AudioBuffer;

/// Half-width of the interpolation kernel in zero crossings.
const KERNEL_ZEROS: f64 = 48.0;
/// Largest phase count for which tap tables are precomputed.
const MAX_CACHED_PHASES: u64 = 8192;

/// Resample `buf` to `target_rate` by windowed-sinc interpolation.
///
/// Output length is `round(len * target / source)`, so duration is
/// preserved to within one sample period. Same-rate input is returned
/// unchanged.
pub fn resample(buf: &AudioBuffer, target_rate: u32) -> AudioBuffer {
    assert!(target_rate > 0, "target_rate must be positive");
    if target_rate == buf.sample_rate {
        return buf.clone();
    }

    let src = buf.sample_rate as u64;
    let dst = target_rate as u64;
    let g = gcd(src, dst);
    let up = dst / g; // output samples per `down` input samples
    let down = src / g;

    let ratio = dst as f64 / src as f64;
    let out_len = (buf.samples.len() as f64 * ratio).round() as usize;
    let cutoff = ratio.min(1.0); // in units of the input Nyquist
    let half_width = KERNEL_ZEROS / cutoff;

    let phase_taps: Option<Vec<Taps>> = (up <= MAX_CACHED_PHASES).then(|| {
        (0..up)
            .map(|p| {
                // frac(n / ratio) for every n with n % up == p
                let frac = (p * down % up) as f64 / up as f64;
                build_taps(frac, cutoff, half_width)
            })
            .collect()
    });

    let x = &buf.samples;
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let t = n as f64 / ratio;
        let base = t.floor() as isize;
        let fallback;
        let taps = match &phase_taps {
            Some(cache) => &cache[(n as u64 % up) as usize],
            None => {
                fallback = build_taps(t - base as f64, cutoff, half_width);
                &fallback
            }
        };
        let mut acc = 0.0;
        for (i, &w) in taps.weights.iter().enumerate() {
            let k = base + taps.first_offset + i as isize;
            if k >= 0 && (k as usize) < x.len() {
                acc += x[k as usize] * w;
            }
        }
        out.push(acc);
    }

    AudioBuffer::new(out, target_rate)
}

struct Taps {
    /// Offset of the first tap relative to floor(t).
    first_offset: isize,
    weights: Vec<f64>,
}

/// Kernel taps for an output point sitting `frac` samples past an input
/// sample, normalized to unit DC gain.
fn build_taps(frac: f64, cutoff: f64, half_width: f64) -> Taps {
    let first_offset = (frac - half_width).ceil() as isize;
    let last_offset = (frac + half_width).floor() as isize;
    let mut weights: Vec<f64> = (first_offset..=last_offset)
        .map(|k| {
            let u = frac - k as f64;
            cutoff * sinc(cutoff * u) * blackman(u / half_width)
        })
        .collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Taps {
        first_offset,
        weights,
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Blackman window on [-1, 1].
fn blackman(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let pu = std::f64::consts::PI * u;
    0.42 + 0.5 * pu.cos() + 0.08 * (2.0 * pu).cos()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, n: usize) -> AudioBuffer {
        let w = 2.0 * std::f64::consts::PI * freq / rate as f64;
        AudioBuffer::new((0..n).map(|i| 0.8 * (w * i as f64).sin()).collect(), rate)
    }

    /// Single-frequency DFT power (Goertzel-style direct evaluation).
    fn dft_power(samples: &[f64], freq: f64, rate: u32) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq / rate as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &s) in samples.iter().enumerate() {
            re += s * (w * i as f64).cos();
            im -= s * (w * i as f64).sin();
        }
        re * re + im * im
    }

    fn peak_frequency(buf: &AudioBuffer, lo: usize, hi: usize) -> f64 {
        (lo..=hi)
            .map(|f| (f, dft_power(&buf.samples, f as f64, buf.sample_rate)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0 as f64
    }

    #[test]
    fn two_to_one_decimation_length() {
        let buf = tone(440.0, 44100, 44100);
        let out = resample(&buf, 22050);
        assert!((out.samples.len() as i64 - 22050).unsigned_abs() <= 1);
        assert_eq!(out.sample_rate, 22050);
    }

    #[test]
    fn sine_peak_survives_decimation() {
        let buf = tone(1000.0, 44100, 44100);
        let out = resample(&buf, 22050);
        // bin width is 1 Hz on both sides
        assert_eq!(peak_frequency(&buf, 900, 1100), 1000.0);
        assert_eq!(peak_frequency(&out, 900, 1100), 1000.0);
    }

    #[test]
    fn identity_resample_is_exact() {
        let buf = tone(997.0, 22050, 4410);
        let out = resample(&buf, 22050);
        assert_eq!(out.samples.len(), buf.samples.len());
        for (a, b) in out.samples.iter().zip(&buf.samples) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn up_down_preserves_tone_energy() {
        let buf = tone(1000.0, 44100, 44100);
        let round = resample(&resample(&buf, 88200), 44100);
        let e0: f64 = buf.samples.iter().map(|s| s * s).sum();
        let e1: f64 = round.samples.iter().map(|s| s * s).sum();
        assert!(
            ((e1 - e0) / e0).abs() < 0.01,
            "energy drift {:.4}%",
            100.0 * (e1 - e0) / e0
        );
    }

    #[test]
    fn irrational_like_ratio_keeps_duration() {
        // 44100 -> 30000 exercises a large phase table
        let buf = tone(500.0, 44100, 22050);
        let out = resample(&buf, 30000);
        assert!((out.duration() - buf.duration()).abs() <= 1.0 / 30000.0);
    }
}
