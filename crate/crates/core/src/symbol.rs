//! Symbolization of the dominant-tone track and the string
//! transformations the detector matches against: band slicing,
//! binarization, two-tone encoding over {a, b, -}, bounded gap repair,
//! cyclic-pattern matching, run-length encoding, outlier trimming, and
//! the periodic-regularity test.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::mel::LogMelSpectrogram;

#[derive(Debug, Error)]
pub enum SymbolError {
    #[error("no mel band centers within [{f_lo}, {f_hi}] Hz")]
    EmptyBand { f_lo: f64, f_hi: f64 },
    #[error("need at least 2 run lengths, got {0}")]
    TooFewRuns(usize),
}

/// The rows of a log-mel spectrogram whose centers fall in a band of
/// interest.
#[derive(Debug, Clone)]
pub struct BandSlice {
    /// `values[row][frame]` in dB, rows ascending in frequency.
    pub values: Vec<Vec<f64>>,
    pub band_centers: Vec<f64>,
    pub frame_duration: f64,
}

impl BandSlice {
    pub fn n_bands(&self) -> usize {
        self.values.len()
    }

    pub fn n_frames(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

/// Keep exactly the bands with centers in `[f_lo, f_hi]`.
pub fn band_filter(
    spec: &LogMelSpectrogram,
    f_lo: f64,
    f_hi: f64,
) -> Result<BandSlice, SymbolError> {
    assert!(f_lo < f_hi, "need f_lo < f_hi");
    let keep: Vec<usize> = spec
        .band_centers
        .iter()
        .enumerate()
        .filter(|(_, &c)| f_lo <= c && c <= f_hi)
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(SymbolError::EmptyBand { f_lo, f_hi });
    }
    Ok(BandSlice {
        values: keep.iter().map(|&i| spec.values[i].clone()).collect(),
        band_centers: keep.iter().map(|&i| spec.band_centers[i]).collect(),
        frame_duration: spec.frame_duration,
    })
}

/// Cell is true iff its max-referenced value lies within `db_min` of the
/// clip's loudest component, i.e. `value > -db_min`.
pub fn binarize(slice: &BandSlice, db_min: f64) -> Vec<Vec<bool>> {
    assert!(db_min > 0.0, "db_min must be positive");
    slice
        .values
        .iter()
        .map(|row| row.iter().map(|&v| v > -db_min).collect())
        .collect()
}

/// A dominant tone: slice-row index plus its center frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub band: usize,
    pub hz: f64,
}

/// Per-frame dominant tone, `None` where no band passes the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct DominantVector {
    pub entries: Vec<Option<Tone>>,
}

impl DominantVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// For each frame, the loudest band among those passing the binarization
/// threshold. Ties resolve to the lowest band index.
pub fn dominant_vector(slice: &BandSlice, db_min: f64) -> DominantVector {
    let active = binarize(slice, db_min);
    let entries = (0..slice.n_frames())
        .map(|t| {
            let mut best: Option<Tone> = None;
            let mut best_db = f64::NEG_INFINITY;
            for (band, row) in slice.values.iter().enumerate() {
                if active[band][t] && row[t] > best_db {
                    best_db = row[t];
                    best = Some(Tone {
                        band,
                        hz: slice.band_centers[band],
                    });
                }
            }
            best
        })
        .collect();
    DominantVector { entries }
}

/// Frame counts per dominant tone, ordered by ascending frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneHistogram {
    pub bins: Vec<ToneBin>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneBin {
    pub band: usize,
    pub hz: f64,
    pub count: usize,
}

impl ToneHistogram {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Total frames carrying a dominant tone.
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }
}

pub fn histogram(v: &DominantVector) -> ToneHistogram {
    let mut counts: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for tone in v.entries.iter().flatten() {
        counts.entry(tone.band).or_insert((tone.hz, 0)).1 += 1;
    }
    ToneHistogram {
        bins: counts
            .into_iter()
            .map(|(band, (hz, count))| ToneBin { band, hz, count })
            .collect(),
    }
}

/// Symbol alphabet: `Hi` prints as 'a', `Lo` as 'b', `Gap` as '-'.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Hi,
    Lo,
    Gap,
}

impl Symbol {
    pub fn as_char(self) -> char {
        match self {
            Symbol::Hi => 'a',
            Symbol::Lo => 'b',
            Symbol::Gap => '-',
        }
    }
}

/// A string over the alphabet {a, b, -}.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymbolString(pub Vec<Symbol>);

impl SymbolString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn slice(&self, start: usize, end: usize) -> SymbolString {
        SymbolString(self.0[start..end].to_vec())
    }
}

impl fmt::Display for SymbolString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for SymbolString {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                'a' => Ok(Symbol::Hi),
                'b' => Ok(Symbol::Lo),
                '-' => Ok(Symbol::Gap),
                other => Err(format!("invalid symbol {other:?}")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(SymbolString)
    }
}

/// Map each frame's dominant tone onto {a, b, -}: 'a' within `tol` of
/// `hi`, 'b' within `tol` of `lo`, '-' otherwise (including no tone).
/// If the tolerance windows overlap, the nearer tone wins.
pub fn encode_ab(v: &DominantVector, hi: f64, lo: f64, tol: f64) -> SymbolString {
    assert!(hi > lo, "need hi > lo");
    assert!(tol >= 0.0, "need tol >= 0");
    SymbolString(
        v.entries
            .iter()
            .map(|entry| match entry {
                None => Symbol::Gap,
                Some(tone) => {
                    let d_hi = (tone.hz - hi).abs();
                    let d_lo = (tone.hz - lo).abs();
                    match (d_hi <= tol, d_lo <= tol) {
                        (true, true) => {
                            if d_hi <= d_lo {
                                Symbol::Hi
                            } else {
                                Symbol::Lo
                            }
                        }
                        (true, false) => Symbol::Hi,
                        (false, true) => Symbol::Lo,
                        (false, false) => Symbol::Gap,
                    }
                }
            })
            .collect(),
    )
}

/// Whether the two tone windows overlap (`hi - lo <= 2 tol`), in which
/// case [`encode_ab`] falls back to nearest-wins.
pub fn tones_overlap(hi: f64, lo: f64, tol: f64) -> bool {
    hi - lo <= 2.0 * tol
}

/// Fill every maximal '-' run of length at most `max_gap` that is flanked
/// by the same symbol on both sides with that symbol. Runs at the string
/// edges or between different symbols are left alone. Length-preserving
/// and idempotent.
pub fn repair(s: &SymbolString, max_gap: usize) -> SymbolString {
    let runs = runs_of(&s.0);
    let mut out = Vec::with_capacity(s.len());
    for (i, &(sym, len)) in runs.iter().enumerate() {
        let fill = if sym == Symbol::Gap && len <= max_gap && i > 0 && i + 1 < runs.len() {
            let prev = runs[i - 1].0;
            let next = runs[i + 1].0;
            if prev == next {
                prev
            } else {
                sym
            }
        } else {
            sym
        };
        out.extend(std::iter::repeat_n(fill, len));
    }
    SymbolString(out)
}

/// A substring matching one-or-more `a+b+` cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleSpan {
    pub start: usize,
    pub end: usize,
    /// Number of `a+b+` repetitions inside the span.
    pub cycles: usize,
}

static CYCLE_PATTERN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:a+b+)+").unwrap());

/// Longest substring matching `(a+b+)^n` with `n >= min_cycles`, or
/// `None`. Dashes never take part in a match: leading/trailing dashes
/// are ignored and interior dash runs break candidate spans — except
/// runs of at most `max_bridge` frames that are strictly shorter than
/// both neighboring symbol runs, which are skipped over. Repair has
/// already filled same-flank gaps of that length, so such survivors sit
/// at tone switches between long phases: they are band-quantization
/// artifacts, not real discontinuities. The flank-length condition
/// keeps sparse strings (isolated symbols separated by dashes) from
/// chaining into fake cycles. `max_bridge = 0` makes every interior
/// dash a hard break. Ties go to the earliest span.
pub fn match_periodicity(
    s: &SymbolString,
    min_cycles: usize,
    max_bridge: usize,
) -> Option<CycleSpan> {
    assert!(min_cycles >= 1, "need min_cycles >= 1");

    // squeeze out bridgeable interior dash runs, remembering original
    // positions
    let mut text = String::with_capacity(s.len());
    let mut to_original = Vec::with_capacity(s.len());
    let runs = runs_of(&s.0);
    let mut at = 0;
    for (i, &(sym, len)) in runs.iter().enumerate() {
        let bridged = sym == Symbol::Gap
            && len <= max_bridge
            && i > 0
            && i + 1 < runs.len()
            && len < runs[i - 1].1
            && len < runs[i + 1].1;
        if !bridged {
            for k in 0..len {
                text.push(sym.as_char());
                to_original.push(at + k);
            }
        }
        at += len;
    }

    let mut best: Option<CycleSpan> = None;
    for m in CYCLE_PATTERN.find_iter(&text) {
        let cycles = m
            .as_str()
            .as_bytes()
            .windows(2)
            .filter(|w| w[0] != b'a' && w[1] == b'a')
            .count()
            + 1; // every span starts with an a-run
        let start = to_original[m.start()];
        let end = to_original[m.end() - 1] + 1;
        if cycles >= min_cycles && best.is_none_or(|b| end - start > b.end - b.start) {
            best = Some(CycleSpan { start, end, cycles });
        }
    }
    best
}

/// Run-length encoding of a symbol string.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunLengthString {
    pub runs: Vec<Run>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub symbol: Symbol,
    pub len: usize,
}

impl RunLengthString {
    /// Expand back to the exact source string.
    pub fn expand(&self) -> SymbolString {
        SymbolString(
            self.runs
                .iter()
                .flat_map(|r| std::iter::repeat_n(r.symbol, r.len))
                .collect(),
        )
    }

    /// Lengths of the runs of one symbol, in order.
    pub fn lengths_of(&self, symbol: Symbol) -> Vec<usize> {
        self.runs
            .iter()
            .filter(|r| r.symbol == symbol)
            .map(|r| r.len)
            .collect()
    }
}

impl fmt::Display for RunLengthString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.runs {
            write!(f, "{}{}", r.symbol.as_char(), r.len)?;
        }
        Ok(())
    }
}

pub fn run_length(s: &SymbolString) -> RunLengthString {
    RunLengthString {
        runs: runs_of(&s.0)
            .into_iter()
            .map(|(symbol, len)| Run { symbol, len })
            .collect(),
    }
}

fn runs_of(symbols: &[Symbol]) -> Vec<(Symbol, usize)> {
    let mut runs: Vec<(Symbol, usize)> = Vec::new();
    for &s in symbols {
        match runs.last_mut() {
            Some((sym, len)) if *sym == s => *len += 1,
            _ => runs.push((s, 1)),
        }
    }
    runs
}

/// Repeatedly drop the element farthest from the current median until
/// exactly two remain. Distance ties drop the later element. Input of
/// size two is returned as-is.
pub fn trim_outliers(lengths: &[usize]) -> Result<Vec<usize>, SymbolError> {
    if lengths.len() < 2 {
        return Err(SymbolError::TooFewRuns(lengths.len()));
    }
    let mut kept: Vec<usize> = lengths.to_vec();
    while kept.len() > 2 {
        let mut sorted = kept.clone();
        sorted.sort_unstable();
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid] as f64
        } else {
            (sorted[mid - 1] + sorted[mid]) as f64 / 2.0
        };
        let (mut worst_at, mut worst_dist) = (0, -1.0);
        for (i, &v) in kept.iter().enumerate() {
            let d = (v as f64 - median).abs();
            if d >= worst_dist {
                worst_dist = d;
                worst_at = i;
            }
        }
        kept.remove(worst_at);
    }
    Ok(kept)
}

/// Periodic-regularity acceptance: mean strictly greater than the
/// population variance.
pub fn regularity_ok(lengths: &[usize]) -> bool {
    if lengths.is_empty() {
        return false;
    }
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<usize>() as f64 / n;
    let var = lengths
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    mean > var
}
