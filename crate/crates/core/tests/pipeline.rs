//! Cross-module integration: file round trips, manifest evaluation, and
//! end-to-end rejection paths.

use std::io::Write;

use hilo_core::audio::{decode_wav, encode_wav, resample, AudioBuffer, SampleFormat};
use hilo_core::detect::{detect, detect_traced, DetectorConfig, RejectReason};
use hilo_core::eval::{evaluate_manifest, ConfusionMatrix, EvalError};
use hilo_core::mel::log_mel;
use hilo_core::synth::{gen_noise, gen_siren, SirenSpec};

fn write_wav(dir: &std::path::Path, name: &str, buf: &AudioBuffer) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, encode_wav(buf, SampleFormat::I16)).unwrap();
    path
}

#[test]
fn wav_file_resample_detect_roundtrip() {
    // a siren synthesized at 44.1 kHz, stored as 16-bit WAV, decoded and
    // brought to the detector's rate
    let siren = gen_siren(&SirenSpec::new(1250.0, 970.0, 0.5, 2), 44100).unwrap();
    let bytes = encode_wav(&siren, SampleFormat::I16);
    let decoded = decode_wav(&bytes).unwrap();
    assert_eq!(decoded.sample_rate, 44100);

    let cfg = DetectorConfig::default();
    let buf = resample(&decoded, cfg.mel.sample_rate);
    let res = detect(&buf, &cfg).unwrap();
    assert!(res.detected, "{res:?}");
}

#[test]
fn silence_is_rejected_for_lack_of_distinct_tones() {
    // silence flattens to 0 dB everywhere; every cell passes the
    // threshold, one band wins every frame, and the two-tone requirement
    // fails
    let buf = AudioBuffer::new(vec![0.0; 4 * 22050], 22050);
    let res = detect(&buf, &DetectorConfig::default()).unwrap();
    assert!(!res.detected);
    assert_eq!(res.reject_reason, RejectReason::NoTones);
}

#[test]
fn trace_covers_every_stage() {
    let buf = gen_siren(&SirenSpec::new(1250.0, 970.0, 0.5, 2), 22050).unwrap();
    let res = detect_traced(&buf, &DetectorConfig::default()).unwrap();
    let trace = res.stage_trace.unwrap();
    for stage in [
        "slice", "vector", "histogram", "candidates", "encode", "repair", "match", "rle",
        "trim", "verdict",
    ] {
        assert!(
            trace.iter().any(|l| l.starts_with(stage)),
            "missing stage {stage} in {trace:#?}"
        );
    }
}

#[test]
fn spectrogram_csv_shape() {
    let buf = gen_noise(2.0, 22050, 1).unwrap();
    let cfg = DetectorConfig::default();
    let spec = log_mel(&buf, &cfg.mel).unwrap();
    let csv = spec.to_csv();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 64);
    let cols = rows[0].split(',').count();
    assert_eq!(cols, spec.n_frames());
    assert!(rows.iter().all(|r| r.split(',').count() == cols));
}

#[test]
fn manifest_evaluation_counts_and_skips() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();

    for (i, (f_hi, f_lo)) in [(1250.0, 970.0), (1320.0, 960.0), (1400.0, 1100.0)]
        .iter()
        .enumerate()
    {
        let buf = gen_siren(&SirenSpec::new(*f_hi, *f_lo, 0.5, 3), 22050).unwrap();
        write_wav(dir.path(), &format!("s{i}.wav"), &buf);
        lines.push(format!("s{i}.wav\tsiren"));
    }
    for seed in 0..3 {
        let buf = gen_noise(4.0, 22050, seed).unwrap();
        write_wav(dir.path(), &format!("n{seed}.wav"), &buf);
        lines.push(format!("n{seed}.wav\tnosiren"));
    }

    let manifest = dir.path().join("corpus.tsv");
    let mut f = std::fs::File::create(&manifest).unwrap();
    writeln!(f, "# test corpus").unwrap();
    writeln!(f, "{}", lines.join("\n")).unwrap();
    drop(f);

    let eval = evaluate_manifest(&manifest, &DetectorConfig::default()).unwrap();
    assert_eq!(eval.cm, ConfusionMatrix::new(3, 0, 3, 0));
    assert_eq!(eval.skipped, 0);
    assert_eq!(eval.verdicts.len(), 6);
    assert_eq!(eval.report.f1, 1.0);

    // one unreadable file among them is reported and excluded
    let mut f = std::fs::File::options().append(true).open(&manifest).unwrap();
    writeln!(f, "missing.wav\tnosiren").unwrap();
    drop(f);
    let eval = evaluate_manifest(&manifest, &DetectorConfig::default()).unwrap();
    assert_eq!(eval.skipped, 1);
    assert_eq!(eval.cm.total(), 6);
    let skipped: Vec<_> = eval
        .verdicts
        .iter()
        .filter(|v| v.prediction.is_none())
        .collect();
    assert_eq!(skipped.len(), 1);
    assert!(skipped[0].detail.contains("read failed"));
}

#[test]
fn too_short_clips_are_skipped_not_counted() {
    let dir = tempfile::tempdir().unwrap();
    let buf = gen_siren(&SirenSpec::new(1250.0, 970.0, 0.3, 1), 22050).unwrap();
    assert!(buf.duration() < 2.0);
    write_wav(dir.path(), "short.wav", &buf);
    let ok = gen_noise(4.0, 22050, 9).unwrap();
    write_wav(dir.path(), "noise.wav", &ok);
    let siren = gen_siren(&SirenSpec::new(1250.0, 970.0, 0.5, 3), 22050).unwrap();
    write_wav(dir.path(), "siren.wav", &siren);

    let manifest = dir.path().join("m.tsv");
    std::fs::write(
        &manifest,
        "short.wav\tsiren\nnoise.wav\tnosiren\nsiren.wav\tsiren\n",
    )
    .unwrap();

    let eval = evaluate_manifest(&manifest, &DetectorConfig::default()).unwrap();
    assert_eq!(eval.skipped, 1);
    assert_eq!(eval.cm, ConfusionMatrix::new(1, 0, 1, 0));
    assert!(eval.verdicts[0].detail.contains("ClipTooShort"));
}

#[test]
fn empty_manifest_is_an_empty_class_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("empty.tsv");
    std::fs::write(&manifest, "# nothing here\n").unwrap();
    assert!(matches!(
        evaluate_manifest(&manifest, &DetectorConfig::default()),
        Err(EvalError::EmptyClass(_))
    ));
}
