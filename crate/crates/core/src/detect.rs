//! Hi-Lo detection: candidate tone selection from the dominant-tone
//! histogram, a bounded elimination loop over encode / repair /
//! periodicity / regularity, and a sliding-window streaming mode.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::mel::{log_mel, MelError, MelParams};
use crate::symbol::{
    band_filter, dominant_vector, encode_ab, histogram, match_periodicity, regularity_ok, repair,
    run_length, tones_overlap, trim_outliers, DominantVector, Symbol, SymbolError, ToneBin,
};

/// Tunable detection criteria. Defaults follow the validated constants:
/// a 700-1500 Hz search band, a 20 dB dominance threshold, a 122 Hz
/// minimum tone gap, +/-31 Hz tone windows, gaps of up to 2 frames
/// repairable, and at least 2 cycles required.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Upper edge of the search band, Hz.
    pub f_hi_limit: f64,
    /// Lower edge of the search band, Hz.
    pub f_lo_limit: f64,
    /// Dominance threshold: a band is active within this many dB of the
    /// clip's loudest component.
    pub db_min: f64,
    /// Minimum distinct dominant tones required to continue.
    pub min_distinct_tones: usize,
    /// Minimum Hi-Lo frequency gap, Hz.
    pub min_gap: f64,
    /// Tone window half-width, Hz.
    pub tone_tol: f64,
    /// Longest '-' run the repair stage may fill, frames.
    pub max_gap_frames: usize,
    /// Minimum full a+b+ cycles for a match.
    pub min_cycles: usize,
    /// Shortest accepted clip, seconds.
    pub min_duration: f64,
    /// Elimination-loop bound.
    pub max_loop_iters: usize,
    pub mel: MelParams,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            f_hi_limit: 1500.0,
            f_lo_limit: 700.0,
            db_min: 20.0,
            min_distinct_tones: 2,
            min_gap: 122.0,
            tone_tol: 31.0,
            max_gap_frames: 2,
            min_cycles: 2,
            min_duration: 2.0,
            max_loop_iters: 4,
            mel: MelParams::default(),
        }
    }
}

impl DetectorConfig {
    /// Check invariants. Hard violations are errors; soft ones come back
    /// as warning strings.
    pub fn validate(&self) -> Result<Vec<String>, DetectError> {
        if self.f_lo_limit >= self.f_hi_limit {
            return Err(DetectError::InvalidConfig(
                "f_lo_limit must be below f_hi_limit".into(),
            ));
        }
        if self.db_min <= 0.0 {
            return Err(DetectError::InvalidConfig("db_min must be positive".into()));
        }
        if self.max_loop_iters < 1 {
            return Err(DetectError::InvalidConfig(
                "max_loop_iters must be at least 1".into(),
            ));
        }
        if self.min_cycles < 1 {
            return Err(DetectError::InvalidConfig(
                "min_cycles must be at least 1".into(),
            ));
        }
        if self.min_distinct_tones < 2 {
            return Err(DetectError::InvalidConfig(
                "min_distinct_tones must be at least 2".into(),
            ));
        }
        self.mel.validate()?;
        let mut warnings = Vec::new();
        if self.min_gap <= 2.0 * self.tone_tol {
            warnings.push(format!(
                "min_gap {} Hz does not exceed 2 * tone_tol {} Hz; tone windows may overlap",
                self.min_gap, self.tone_tol
            ));
        }
        Ok(warnings)
    }
}

/// Why a clip was not accepted as a Hi-Lo siren.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    None,
    NoTones,
    GapFail,
    PeriodicityFail,
    RegularityFail,
    LoopExhausted,
    ClipTooShort,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::None => "None",
            RejectReason::NoTones => "NoTones",
            RejectReason::GapFail => "GapFail",
            RejectReason::PeriodicityFail => "PeriodicityFail",
            RejectReason::RegularityFail => "RegularityFail",
            RejectReason::LoopExhausted => "LoopExhausted",
            RejectReason::ClipTooShort => "ClipTooShort",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub detected: bool,
    pub hi_tone: Option<f64>,
    pub lo_tone: Option<f64>,
    pub cycles: usize,
    pub iterations_used: usize,
    pub reject_reason: RejectReason,
    pub stage_trace: Option<Vec<String>>,
}

impl DetectionResult {
    fn rejected(reason: RejectReason, iterations: usize, trace: Option<Vec<String>>) -> Self {
        Self {
            detected: false,
            hi_tone: None,
            lo_tone: None,
            cycles: 0,
            iterations_used: iterations,
            reject_reason: reason,
            stage_trace: trace,
        }
    }
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("clip too short: {got:.3} s, minimum {min:.3} s")]
    ClipTooShort { got: f64, min: f64 },
    #[error(transparent)]
    Mel(#[from] MelError),
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
}

/// Run the full detection pipeline on a clip.
pub fn detect(buf: &AudioBuffer, cfg: &DetectorConfig) -> Result<DetectionResult, DetectError> {
    detect_inner(buf, cfg, false)
}

/// Like [`detect`], but with `stage_trace` populated with one line per
/// pipeline stage.
pub fn detect_traced(
    buf: &AudioBuffer,
    cfg: &DetectorConfig,
) -> Result<DetectionResult, DetectError> {
    detect_inner(buf, cfg, true)
}

fn detect_inner(
    buf: &AudioBuffer,
    cfg: &DetectorConfig,
    traced: bool,
) -> Result<DetectionResult, DetectError> {
    let warnings = cfg.validate()?;
    if buf.sample_rate != cfg.mel.sample_rate {
        return Err(DetectError::InvalidConfig(format!(
            "buffer rate {} != configured rate {}; resample first",
            buf.sample_rate, cfg.mel.sample_rate
        )));
    }
    if buf.duration() < cfg.min_duration || buf.len() < cfg.mel.n_fft {
        return Err(DetectError::ClipTooShort {
            got: buf.duration(),
            min: cfg.min_duration,
        });
    }

    let mut trace = Trace::new(traced);
    for w in warnings {
        trace.push(|| format!("warning\t{w}"));
    }
    if tones_overlap(cfg.f_hi_limit, cfg.f_lo_limit, cfg.tone_tol) {
        // degenerate band; nearest-wins encoding still applies
        trace.push(|| "warning\tsearch band narrower than tone windows".to_string());
    }

    let spec = log_mel(buf, &cfg.mel)?;
    let slice = match band_filter(&spec, cfg.f_lo_limit, cfg.f_hi_limit) {
        Ok(slice) => slice,
        Err(SymbolError::EmptyBand { .. }) => {
            trace.push(|| "slice\tempty band".to_string());
            return Ok(DetectionResult::rejected(
                RejectReason::NoTones,
                0,
                trace.take(),
            ));
        }
        Err(SymbolError::TooFewRuns(_)) => unreachable!("band_filter cannot report TooFewRuns"),
    };
    trace.push(|| {
        format!(
            "slice\tbands={} centers={:.1}..{:.1}",
            slice.n_bands(),
            slice.band_centers.first().unwrap(),
            slice.band_centers.last().unwrap()
        )
    });

    let vector = dominant_vector(&slice, cfg.db_min);
    trace.push(|| format!("vector\t{}", format_vector(&vector)));

    let hist = histogram(&vector);
    trace.push(|| {
        let bins: Vec<String> = hist
            .bins
            .iter()
            .map(|b| format!("{:.1}:{}", b.hz, b.count))
            .collect();
        format!("histogram\t{}", bins.join(" "))
    });

    if hist.len() < cfg.min_distinct_tones {
        trace.push(|| format!("verdict\tNoTones ({} distinct tones)", hist.len()));
        return Ok(DetectionResult::rejected(
            RejectReason::NoTones,
            0,
            trace.take(),
        ));
    }

    let mut working: Vec<ToneBin> = hist.bins.clone();
    let mut last_fail = RejectReason::LoopExhausted;
    let mut iterations = 0;

    for iter in 1..=cfg.max_loop_iters {
        if working.len() < cfg.min_distinct_tones {
            trace.push(|| format!("verdict\t{last_fail} (histogram exhausted)"));
            return Ok(DetectionResult::rejected(
                last_fail,
                iterations,
                trace.take(),
            ));
        }
        iterations = iter;

        // most frequent first; count ties resolve by ascending frequency
        let mut order: Vec<usize> = (0..working.len()).collect();
        order.sort_by(|&a, &b| {
            working[b]
                .count
                .cmp(&working[a].count)
                .then(working[a].hz.total_cmp(&working[b].hz))
        });
        let (first, second) = (working[order[0]], working[order[1]]);
        let (hi, lo) = if first.hz > second.hz {
            (first, second)
        } else {
            (second, first)
        };
        trace.push(|| {
            format!(
                "candidates\titer={iter} hi={:.1} lo={:.1} counts={}/{}",
                hi.hz, lo.hz, first.count, second.count
            )
        });

        if hi.hz - lo.hz < cfg.min_gap {
            last_fail = RejectReason::GapFail;
            let at = order[0]; // drop the most frequent tone
            trace.push(|| format!("gap\titer={iter} {:.1} Hz < min; drop {:.1}", hi.hz - lo.hz, working[at].hz));
            working.remove(at);
            continue;
        }

        let encoded = encode_ab(&vector, hi.hz, lo.hz, cfg.tone_tol);
        trace.push(|| format!("encode\titer={iter} {encoded}"));

        let repaired = repair(&encoded, cfg.max_gap_frames);
        trace.push(|| format!("repair\titer={iter} {repaired}"));

        let span = match match_periodicity(&repaired, cfg.min_cycles, cfg.max_gap_frames) {
            Some(span) => span,
            None => {
                last_fail = RejectReason::PeriodicityFail;
                remove_highest_frequency(&mut working, &mut trace, iter, "no periodic pattern");
                continue;
            }
        };
        trace.push(|| {
            format!(
                "match\titer={iter} span=[{},{}) cycles={}",
                span.start, span.end, span.cycles
            )
        });

        let rle = run_length(&repaired.slice(span.start, span.end));
        trace.push(|| format!("rle\titer={iter} {rle}"));

        let a_runs = rle.lengths_of(Symbol::Hi);
        let b_runs = rle.lengths_of(Symbol::Lo);
        let regular = match (trim_outliers(&a_runs), trim_outliers(&b_runs)) {
            (Ok(a), Ok(b)) => {
                trace.push(|| {
                    format!(
                        "trim\titer={iter} a={a_runs:?}->{a:?} b={b_runs:?}->{b:?}"
                    )
                });
                regularity_ok(&a) && regularity_ok(&b)
            }
            _ => false,
        };
        if regular {
            trace.push(|| format!("verdict\tdetected hi={:.1} lo={:.1} cycles={}", hi.hz, lo.hz, span.cycles));
            return Ok(DetectionResult {
                detected: true,
                hi_tone: Some(hi.hz),
                lo_tone: Some(lo.hz),
                cycles: span.cycles,
                iterations_used: iterations,
                reject_reason: RejectReason::None,
                stage_trace: trace.take(),
            });
        }

        last_fail = RejectReason::RegularityFail;
        remove_highest_frequency(&mut working, &mut trace, iter, "irregular run lengths");
    }

    trace.push(|| format!("verdict\t{last_fail} (loop bound reached)"));
    Ok(DetectionResult::rejected(
        last_fail,
        iterations,
        trace.take(),
    ))
}

/// Drop the highest-frequency entry, the likeliest harmonic.
fn remove_highest_frequency(working: &mut Vec<ToneBin>, trace: &mut Trace, iter: usize, why: &str) {
    if let Some(at) = (0..working.len()).max_by(|&a, &b| working[a].hz.total_cmp(&working[b].hz)) {
        let hz = working[at].hz;
        trace.push(|| format!("eliminate\titer={iter} {why}; drop {hz:.1}"));
        working.remove(at);
    }
}

fn format_vector(v: &DominantVector) -> String {
    let parts: Vec<String> = v
        .entries
        .iter()
        .map(|e| match e {
            Some(t) => format!("{:.1}", t.hz),
            None => "-".to_string(),
        })
        .collect();
    parts.join(" ")
}

struct Trace(Option<Vec<String>>);

impl Trace {
    fn new(enabled: bool) -> Self {
        Trace(enabled.then(Vec::new))
    }

    fn push(&mut self, line: impl FnOnce() -> String) {
        if let Some(lines) = &mut self.0 {
            lines.push(line());
        }
    }

    fn take(&mut self) -> Option<Vec<String>> {
        self.0.take()
    }
}

/// A detection onset in a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SirenEvent {
    /// Seconds from stream start to the end of the detecting window.
    pub timestamp: f64,
    pub result: DetectionResult,
}

/// Edge-triggered sliding-window detector over a chunked sample stream.
///
/// Every `stride` seconds after the first full `window`, [`detect`] runs
/// on the trailing window; an event fires on each false-to-true
/// transition. Memory stays bounded by one window regardless of stream
/// length, and output does not depend on chunk sizes.
pub struct StreamDetector {
    cfg: DetectorConfig,
    window_samples: usize,
    stride_samples: u64,
    buf: VecDeque<f64>,
    consumed: u64,
    next_eval: u64,
    active: bool,
}

impl StreamDetector {
    pub fn new(cfg: DetectorConfig, window_s: f64, stride_s: f64) -> Result<Self, DetectError> {
        cfg.validate()?;
        if window_s < cfg.min_duration {
            return Err(DetectError::InvalidConfig(format!(
                "window {window_s} s shorter than min_duration {} s",
                cfg.min_duration
            )));
        }
        if !(stride_s > 0.0 && stride_s <= window_s) {
            return Err(DetectError::InvalidConfig(
                "need 0 < stride <= window".into(),
            ));
        }
        let rate = cfg.mel.sample_rate as f64;
        let window_samples = (window_s * rate).round() as usize;
        let stride_samples = ((stride_s * rate).round() as u64).max(1);
        if window_samples < cfg.mel.n_fft {
            return Err(DetectError::InvalidConfig(format!(
                "window of {window_samples} samples is shorter than one {}-sample frame",
                cfg.mel.n_fft
            )));
        }
        Ok(Self {
            cfg,
            window_samples,
            stride_samples,
            buf: VecDeque::with_capacity(window_samples),
            consumed: 0,
            next_eval: window_samples as u64,
            active: false,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    /// Samples currently buffered (at most one window).
    pub fn buffered_samples(&self) -> usize {
        self.buf.len()
    }

    /// Feed a chunk; returns the events it completes, in order.
    pub fn push(&mut self, chunk: &[f64]) -> Result<Vec<SirenEvent>, DetectError> {
        let mut events = Vec::new();
        let mut offset = 0;
        while offset < chunk.len() {
            let until_eval = (self.next_eval - self.consumed) as usize;
            let take = until_eval.min(chunk.len() - offset);
            for &s in &chunk[offset..offset + take] {
                if self.buf.len() == self.window_samples {
                    self.buf.pop_front();
                }
                self.buf.push_back(s);
            }
            self.consumed += take as u64;
            offset += take;

            if self.consumed == self.next_eval {
                let window: Vec<f64> = self.buf.iter().copied().collect();
                let buf = AudioBuffer::new(window, self.cfg.mel.sample_rate);
                let result = detect(&buf, &self.cfg)?;
                let timestamp = self.consumed as f64 / self.cfg.mel.sample_rate as f64;
                if result.detected && !self.active {
                    self.active = true;
                    events.push(SirenEvent { timestamp, result });
                } else {
                    self.active = result.detected;
                }
                self.next_eval += self.stride_samples;
            }
        }
        Ok(events)
    }
}
