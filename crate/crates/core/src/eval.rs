//! Batch evaluation: confusion matrices, the derived rate metrics, and
//! the signal-detection-theory discriminability (d') and decision
//! criterion, plus a labeled-manifest harness around the detector.

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::audio::{decode_wav, resample};
use crate::detect::{detect, DetectError, DetectorConfig, RejectReason};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("label/prediction length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("probit argument {0} outside (0, 1)")]
    OutOfDomain(f64),
    #[error("confusion matrix has an empty {0} class")]
    EmptyClass(&'static str),
    #[error("manifest line {line}: {msg}")]
    ManifestParse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Standard 2x2 counts with siren as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }

    pub fn total(&self) -> usize {
        self.positives() + self.negatives()
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tp={} fp={} tn={} fn={}",
            self.tp, self.fp, self.tn, self.fn_
        )
    }
}

/// Count the 2x2 outcomes of paired labels and predictions.
pub fn confusion(labels: &[bool], predictions: &[bool]) -> Result<ConfusionMatrix, EvalError> {
    if labels.len() != predictions.len() {
        return Err(EvalError::LengthMismatch(labels.len(), predictions.len()));
    }
    if labels.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut cm = ConfusionMatrix::new(0, 0, 0, 0);
    for (&label, &pred) in labels.iter().zip(predictions) {
        match (label, pred) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Inverse standard-normal CDF (Wichura's AS241 rational approximation,
/// accurate to well below 1e-6 across (0, 1)).
pub fn probit(p: f64) -> Result<f64, EvalError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(EvalError::OutOfDomain(p));
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return Ok(q * poly(&PROBIT_A, r) / poly(&PROBIT_B, r));
    }

    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&PROBIT_C, r) / poly(&PROBIT_D, r)
    } else {
        let r = r - 5.0;
        poly(&PROBIT_E, r) / poly(&PROBIT_F, r)
    };
    Ok(if q < 0.0 { -x } else { x })
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

// AS241 PPND16 coefficients, constant term first.
const PROBIT_A: [f64; 8] = [
    3.387_132_872_796_366_5e0,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const PROBIT_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545e3,
];
const PROBIT_C: [f64; 8] = [
    1.423_437_110_749_683_5e0,
    4.630_337_846_156_545e0,
    5.769_497_221_460_691e0,
    3.647_848_324_763_204_5e0,
    1.270_458_252_452_368_4e0,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const PROBIT_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759e0,
    1.676_384_830_183_803_8e0,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const PROBIT_E: [f64; 8] = [
    6.657_904_643_501_104,
    5.463_784_911_164_114e0,
    1.784_826_539_917_291_3e0,
    2.965_605_718_285_048_9e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const PROBIT_F: [f64; 7] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-6,
    1.421_511_758_316_446e-15,
];

/// The derived metric set: error rate, sensitivity, specificity,
/// precision, F1, d', and the decision criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub error_rate: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    /// `None` when no positive predictions were made (tp + fp = 0).
    pub precision: Option<f64>,
    pub f1: f64,
    pub d_prime: f64,
    pub criterion: f64,
}

/// Compute the metric set from a confusion matrix.
///
/// Hit and false-alarm rates are clamped to `[1/(2N), 1 - 1/(2N)]` for a
/// class of size N before the probit transform, so perfect runs stay
/// finite.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let n_pos = cm.positives();
    let n_neg = cm.negatives();
    if n_pos == 0 {
        return Err(EvalError::EmptyClass("positive"));
    }
    if n_neg == 0 {
        return Err(EvalError::EmptyClass("negative"));
    }

    let sensitivity = cm.tp as f64 / n_pos as f64;
    let specificity = cm.tn as f64 / n_neg as f64;
    let error_rate = (cm.fp + cm.fn_) as f64 / cm.total() as f64;
    let precision = (cm.tp + cm.fp > 0).then(|| cm.tp as f64 / (cm.tp + cm.fp) as f64);
    let f1 = match precision {
        Some(p) if p + sensitivity > 0.0 => 2.0 * p * sensitivity / (p + sensitivity),
        _ => 0.0,
    };

    let clamp = |rate: f64, n: usize| {
        let eps = 1.0 / (2.0 * n as f64);
        rate.clamp(eps, 1.0 - eps)
    };
    let z_hit = probit(clamp(sensitivity, n_pos))?;
    let z_fa = probit(clamp(cm.fp as f64 / n_neg as f64, n_neg))?;

    Ok(MetricsReport {
        error_rate,
        sensitivity,
        specificity,
        precision,
        f1,
        d_prime: z_hit - z_fa,
        criterion: -(z_hit + z_fa) / 2.0,
    })
}

/// Aligned plain-text report.
pub fn render_report(
    cm: &ConfusionMatrix,
    report: &MetricsReport,
    evaluated: usize,
    skipped: usize,
) -> String {
    let precision = match report.precision {
        Some(p) => format!("{p:.4}"),
        None => "undefined (no positive predictions)".to_string(),
    };
    format!(
        "files        {evaluated} evaluated, {skipped} skipped\n\
         confusion    {cm}\n\
         error_rate   {:.4}\n\
         sensitivity  {:.4}\n\
         specificity  {:.4}\n\
         precision    {precision}\n\
         f1           {:.4}\n\
         d_prime      {:.4}\n\
         criterion    {:.4}\n",
        report.error_rate,
        report.sensitivity,
        report.specificity,
        report.f1,
        report.d_prime,
        report.criterion,
    )
}

/// Single CSV line: `tp,fp,tn,fn,error,sens,spec,prec,f1,dprime,criterion`.
pub fn render_csv(cm: &ConfusionMatrix, report: &MetricsReport) -> String {
    format!(
        "{},{},{},{},{:.6},{:.6},{:.6},{},{:.6},{:.6},{:.6}",
        cm.tp,
        cm.fp,
        cm.tn,
        cm.fn_,
        report.error_rate,
        report.sensitivity,
        report.specificity,
        report
            .precision
            .map_or("nan".to_string(), |p| format!("{p:.6}")),
        report.f1,
        report.d_prime,
        report.criterion,
    )
}

/// One line of a labeled manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    /// true = siren.
    pub label: bool,
}

/// Parse `<path>\t<siren|nosiren>` lines; `#` starts a comment.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, EvalError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (path, label) = line.split_once('\t').ok_or_else(|| EvalError::ManifestParse {
            line: i + 1,
            msg: "expected <path>\\t<label>".to_string(),
        })?;
        let label = match label.trim() {
            "siren" => true,
            "nosiren" => false,
            other => {
                return Err(EvalError::ManifestParse {
                    line: i + 1,
                    msg: format!("label must be 'siren' or 'nosiren', got {other:?}"),
                })
            }
        };
        entries.push(ManifestEntry {
            path: PathBuf::from(path.trim()),
            label,
        });
    }
    Ok(entries)
}

/// Outcome for one manifest line, in manifest order.
#[derive(Debug, Clone)]
pub struct FileVerdict {
    pub path: PathBuf,
    pub label: bool,
    /// `None` when the file was skipped (unreadable, undecodable, or too
    /// short).
    pub prediction: Option<bool>,
    /// Reject reason for evaluated files, error text for skipped ones.
    pub detail: String,
}

#[derive(Debug)]
pub struct Evaluation {
    pub cm: ConfusionMatrix,
    pub report: MetricsReport,
    pub verdicts: Vec<FileVerdict>,
    pub skipped: usize,
}

/// Run the detector over every manifest entry and aggregate the counts.
///
/// Relative paths are resolved against the manifest's directory. Files
/// that cannot be read, decoded, or are shorter than the configured
/// minimum are reported as skipped and excluded from the counts.
pub fn evaluate_manifest(
    manifest_path: &Path,
    cfg: &DetectorConfig,
) -> Result<Evaluation, EvalError> {
    let text = std::fs::read_to_string(manifest_path)?;
    let entries = parse_manifest(&text)?;
    if entries.is_empty() {
        return Err(EvalError::EmptyClass("positive"));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut verdicts = Vec::with_capacity(entries.len());
    let mut labels = Vec::new();
    let mut predictions = Vec::new();
    for entry in entries {
        let resolved = if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            base.join(&entry.path)
        };
        match classify_file(&resolved, cfg) {
            Ok(result) => {
                labels.push(entry.label);
                predictions.push(result.0);
                verdicts.push(FileVerdict {
                    path: entry.path,
                    label: entry.label,
                    prediction: Some(result.0),
                    detail: result.1,
                });
            }
            Err(err) => verdicts.push(FileVerdict {
                path: entry.path,
                label: entry.label,
                prediction: None,
                detail: err,
            }),
        }
    }

    let skipped = verdicts.len() - labels.len();
    let cm = confusion(&labels, &predictions)?;
    let report = metrics(&cm)?;
    Ok(Evaluation {
        cm,
        report,
        verdicts,
        skipped,
    })
}

fn classify_file(path: &Path, cfg: &DetectorConfig) -> Result<(bool, String), String> {
    let bytes = std::fs::read(path).map_err(|e| format!("read failed: {e}"))?;
    let buf = decode_wav(&bytes).map_err(|e| e.to_string())?;
    let buf = if buf.sample_rate == cfg.mel.sample_rate {
        buf
    } else {
        resample(&buf, cfg.mel.sample_rate)
    };
    match detect(&buf, cfg) {
        Ok(result) => Ok((result.detected, result.reject_reason.to_string())),
        Err(DetectError::ClipTooShort { got, min }) => {
            Err(format!("{}: {got:.3} s < {min:.3} s", RejectReason::ClipTooShort))
        }
        Err(other) => Err(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    /// Independent high-precision probit: bisection on the statrs normal
    /// CDF.
    fn probit_oracle(p: f64) -> f64 {
        let n = Normal::new(0.0, 1.0).unwrap();
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if n.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn confusion_matches_published_counts() {
        // DSP run: 38 positives, 280 negatives
        let mut labels = vec![true; 38];
        labels.extend(vec![false; 280]);
        let mut preds = vec![true; 36];
        preds.extend(vec![false; 2]);
        preds.extend(vec![true; 7]);
        preds.extend(vec![false; 273]);
        let cm = confusion(&labels, &preds).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(36, 7, 273, 2));
        assert_eq!(cm.positives(), 38);
        assert_eq!(cm.negatives(), 280);
    }

    #[test]
    fn confusion_all_correct() {
        let labels = [true, true, true, false, false, false];
        let cm = confusion(&labels, &labels).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(3, 0, 3, 0));
    }

    #[test]
    fn confusion_rejects_mismatch_and_empty() {
        assert!(matches!(
            confusion(&[true], &[true, false]),
            Err(EvalError::LengthMismatch(1, 2))
        ));
        assert!(matches!(confusion(&[], &[]), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn probit_closed_forms() {
        assert_eq!(probit(0.5).unwrap(), 0.0);
        assert!((probit(0.975).unwrap() - 1.959964).abs() < 1e-6);
        for p in [1e-6, 0.01, 0.3, 0.7, 0.99, 1.0 - 1e-6] {
            let z = probit(p).unwrap();
            let anti = probit(1.0 - p).unwrap();
            // 1 - p rounds, and the probit slope amplifies that in the tails
            assert!((z + anti).abs() < 1e-9, "antisymmetry at {p}: {z} vs {anti}");
        }
        assert!(matches!(probit(0.0), Err(EvalError::OutOfDomain(_))));
        assert!(matches!(probit(1.0), Err(EvalError::OutOfDomain(_))));
    }

    #[test]
    fn probit_matches_high_precision_oracle() {
        let mut worst = 0.0f64;
        for i in 0..=600 {
            // log-spaced through both tails plus the center
            let t = i as f64 / 600.0;
            let p = 1e-6 * (0.5 / 1e-6f64).powf(t);
            for p in [p, 1.0 - p] {
                let err = (probit(p).unwrap() - probit_oracle(p)).abs();
                worst = worst.max(err);
            }
        }
        assert!(worst < 1e-6, "worst probit error {worst:.2e}");
    }

    #[test]
    fn dsp_metrics_match_published_table() {
        let report = metrics(&ConfusionMatrix::new(36, 7, 273, 2)).unwrap();
        assert!((report.error_rate - 0.03).abs() <= 0.01);
        assert!((report.sensitivity - 0.95).abs() <= 0.01);
        assert!((report.specificity - 0.98).abs() <= 0.01);
        assert!((report.precision.unwrap() - 0.84).abs() <= 0.01);
        assert!((report.f1 - 0.89).abs() <= 0.01);
        assert!((report.d_prime - 3.58).abs() <= 0.02);
        assert!((report.criterion - 0.17).abs() <= 0.02);
    }

    #[test]
    fn cnn_metrics_match_published_table() {
        let report = metrics(&ConfusionMatrix::new(27, 14, 266, 11)).unwrap();
        assert!((report.error_rate - 0.08).abs() <= 0.01);
        assert!((report.sensitivity - 0.71).abs() <= 0.01);
        assert!((report.specificity - 0.95).abs() <= 0.01);
        assert!((report.precision.unwrap() - 0.66).abs() <= 0.01);
        assert!((report.f1 - 0.68).abs() <= 0.01);
        assert!((report.d_prime - 2.20).abs() <= 0.02);
        assert!((report.criterion - 0.55).abs() <= 0.02);
    }

    #[test]
    fn perfect_run_is_clamped() {
        let report = metrics(&ConfusionMatrix::new(10, 0, 10, 0)).unwrap();
        assert_eq!(report.error_rate, 0.0);
        assert_eq!(report.sensitivity, 1.0);
        assert_eq!(report.specificity, 1.0);
        assert_eq!(report.f1, 1.0);
        let expected = probit(0.95).unwrap() - probit(0.05).unwrap();
        assert!((report.d_prime - expected).abs() < 1e-12);
        assert!((report.d_prime - 3.29).abs() < 0.01);
    }

    #[test]
    fn degenerate_precision_is_reported_undefined() {
        let report = metrics(&ConfusionMatrix::new(0, 0, 10, 5)).unwrap();
        assert_eq!(report.precision, None);
        assert_eq!(report.f1, 0.0);
    }

    #[test]
    fn empty_class_is_an_error() {
        assert!(matches!(
            metrics(&ConfusionMatrix::new(0, 3, 7, 0)),
            Err(EvalError::EmptyClass("positive"))
        ));
        assert!(matches!(
            metrics(&ConfusionMatrix::new(3, 0, 0, 1)),
            Err(EvalError::EmptyClass("negative"))
        ));
    }

    #[test]
    fn rate_metrics_are_scale_consistent() {
        let small = metrics(&ConfusionMatrix::new(9, 2, 68, 1)).unwrap();
        let big = metrics(&ConfusionMatrix::new(36, 8, 272, 4)).unwrap();
        assert!((small.error_rate - big.error_rate).abs() < 1e-12);
        assert!((small.sensitivity - big.sensitivity).abs() < 1e-12);
        assert!((small.specificity - big.specificity).abs() < 1e-12);
        assert!((small.precision.unwrap() - big.precision.unwrap()).abs() < 1e-12);
        assert!((small.f1 - big.f1).abs() < 1e-12);
    }

    #[test]
    fn f1_is_the_harmonic_mean() {
        // precision == sensitivity == f1 when the two agree
        let r = metrics(&ConfusionMatrix::new(10, 5, 25, 5)).unwrap();
        assert!((r.precision.unwrap() - r.sensitivity).abs() < 1e-12);
        assert!((r.f1 - r.sensitivity).abs() < 1e-12);

        // otherwise f1 sits below the arithmetic mean
        let r = metrics(&ConfusionMatrix::new(30, 3, 50, 10)).unwrap();
        let arith = (r.precision.unwrap() + r.sensitivity) / 2.0;
        assert!(r.f1 < arith);
        assert!(r.f1 > 0.0);
    }

    #[test]
    fn d_prime_antisymmetry_under_rate_swap() {
        // swap hit and false-alarm rates: 30/40 hits, 10/40 fa <-> 10/40 hits, 30/40 fa
        let a = metrics(&ConfusionMatrix::new(30, 10, 30, 10)).unwrap();
        let b = metrics(&ConfusionMatrix::new(10, 30, 10, 30)).unwrap();
        assert!((a.d_prime + b.d_prime).abs() < 1e-12);
    }

    #[test]
    fn manifest_parsing() {
        let text = "# corpus\nclips/s1.wav\tsiren\n\nclips/n1.wav\tnosiren\n";
        let entries = parse_manifest(text).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].path, PathBuf::from("clips/s1.wav"));
        assert!(entries[0].label);
        assert!(!entries[1].label);

        assert!(matches!(
            parse_manifest("clip.wav\tmaybe"),
            Err(EvalError::ManifestParse { line: 1, .. })
        ));
        assert!(matches!(
            parse_manifest("no-tab-here"),
            Err(EvalError::ManifestParse { .. })
        ));
    }
}
