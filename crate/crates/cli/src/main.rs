//! `hilo` — Hi-Lo siren detection from the command line.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hilo_core::audio::{decode_wav, encode_wav, resample, AudioBuffer, SampleFormat};
use hilo_core::detect::{
    detect, detect_traced, DetectError, DetectionResult, DetectorConfig, RejectReason,
    SirenEvent, StreamDetector,
};
use hilo_core::eval::{evaluate_manifest, metrics, render_csv, render_report, ConfusionMatrix};
use hilo_core::mel::log_mel;
use hilo_core::synth::{gen_noise, gen_siren, gen_sweep, gen_tone, SirenSpec};

#[derive(Parser)]
#[command(name = "hilo", version, about = "Hi-Lo emergency-siren detector")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file with one key=value per line ('#' comments)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a single config key (repeatable), e.g. --set min_gap=100
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Classify WAV files; prints <path>\t<SIREN|NOSIREN>\t<reason>
    Detect {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Detect in s16le mono PCM from stdin; prints one line per onset
    Stream {
        /// Sample rate of the incoming PCM, Hz
        #[arg(long)]
        rate: u32,
        /// Analysis window, seconds
        #[arg(long, default_value_t = 4.0)]
        window: f64,
        /// Seconds between analyses
        #[arg(long, default_value_t = 1.0)]
        stride: f64,
    },
    /// Score a labeled manifest (or raw confusion counts) and report
    /// the metric set
    Eval {
        /// Manifest of <path>\t<siren|nosiren> lines
        #[arg(long, conflicts_with = "counts")]
        manifest: Option<PathBuf>,
        /// Skip detection and score raw counts: tp,fp,tn,fn
        #[arg(long, value_name = "TP,FP,TN,FN")]
        counts: Option<String>,
        /// Emit one CSV line instead of the text report
        #[arg(long)]
        csv: bool,
        /// Also print one verdict line per manifest entry
        #[arg(long)]
        verdicts: bool,
    },
    /// Generate test signals as 16-bit WAV files
    Synth {
        #[command(subcommand)]
        what: SynthCmd,
    },
    /// Print the effective config, per-stage symbolization, and verdict
    /// for one file
    Dump {
        file: PathBuf,
        /// Also write the log-mel matrix as CSV
        #[arg(long, value_name = "PATH")]
        spectrogram: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Two alternating tones, optionally noisy, with an optional dropout
    Siren {
        #[arg(long)]
        hi: f64,
        #[arg(long)]
        lo: f64,
        /// Seconds per tone phase
        #[arg(long)]
        dwell: f64,
        #[arg(long)]
        cycles: usize,
        #[arg(long, default_value_t = 0.8)]
        amp: f64,
        /// Add white noise at this SNR (dB)
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Zero a span: position,length in seconds
        #[arg(long, value_name = "POS,LEN")]
        dropout: Option<String>,
        #[arg(long, default_value_t = 22050)]
        rate: u32,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Steady sine tone
    Tone {
        #[arg(long)]
        freq: f64,
        #[arg(long)]
        dur: f64,
        #[arg(long, default_value_t = 22050)]
        rate: u32,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Seeded uniform white noise
    Noise {
        #[arg(long)]
        dur: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 22050)]
        rate: u32,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Linear frequency sweep
    Sweep {
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        dur: f64,
        #[arg(long, default_value_t = 22050)]
        rate: u32,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve_config(&cli.config) {
        Ok(cfg) => cfg,
        Err(msg) => return fail(&msg),
    };
    let result = match cli.cmd {
        Cmd::Detect { files } => cmd_detect(&files, &cfg),
        Cmd::Stream {
            rate,
            window,
            stride,
        } => cmd_stream(rate, window, stride, cfg),
        Cmd::Eval {
            manifest,
            counts,
            csv,
            verdicts,
        } => cmd_eval(manifest.as_deref(), counts.as_deref(), csv, verdicts, &cfg),
        Cmd::Synth { what } => cmd_synth(what),
        Cmd::Dump { file, spectrogram } => cmd_dump(&file, spectrogram.as_deref(), &cfg),
    };
    match result {
        Ok(code) => code,
        Err(msg) => fail(&msg),
    }
}

fn fail(msg: &str) -> ExitCode {
    eprintln!("hilo: {msg}");
    ExitCode::from(2)
}

/// Precedence: built-in defaults < config file < --set overrides.
fn resolve_config(args: &ConfigArgs) -> Result<DetectorConfig, String> {
    let mut cfg = DetectorConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        cfg.apply_text(&text)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
    }
    for kv in &args.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.apply_kv(key.trim(), value).map_err(|e| e.to_string())?;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn load_clip(path: &Path, cfg: &DetectorConfig) -> Result<AudioBuffer, String> {
    let bytes =
        std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let buf = decode_wav(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(if buf.sample_rate == cfg.mel.sample_rate {
        buf
    } else {
        resample(&buf, cfg.mel.sample_rate)
    })
}

fn cmd_detect(files: &[PathBuf], cfg: &DetectorConfig) -> Result<ExitCode, String> {
    let mut any = false;
    for path in files {
        let buf = load_clip(path, cfg)?;
        let verdict = match detect(&buf, cfg) {
            Ok(res) => {
                any |= res.detected;
                if res.detected {
                    format!("SIREN\t{}", res.reject_reason)
                } else {
                    format!("NOSIREN\t{}", res.reject_reason)
                }
            }
            Err(DetectError::ClipTooShort { .. }) => {
                format!("NOSIREN\t{}", RejectReason::ClipTooShort)
            }
            Err(other) => return Err(format!("{}: {other}", path.display())),
        };
        println!("{}\t{verdict}", path.display());
    }
    Ok(ExitCode::from(if any { 0 } else { 1 }))
}

fn event_line(event: &SirenEvent) -> String {
    format!(
        "{:.3}\tHI-LO\t{:.1}\t{:.1}\t{}",
        event.timestamp,
        event.result.hi_tone.unwrap_or(0.0),
        event.result.lo_tone.unwrap_or(0.0),
        event.result.cycles
    )
}

fn cmd_stream(rate: u32, window: f64, stride: f64, mut cfg: DetectorConfig) -> Result<ExitCode, String> {
    cfg.mel.sample_rate = rate;
    let mut detector =
        StreamDetector::new(cfg, window, stride).map_err(|e| e.to_string())?;

    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let stdout = std::io::stdout();
    let mut output = stdout.lock();

    let mut bytes = [0u8; 8192];
    let mut carry: Option<u8> = None;
    loop {
        let n = input.read(&mut bytes).map_err(|e| format!("stdin: {e}"))?;
        if n == 0 {
            if carry.is_some() {
                return Err("stream ended mid-sample (odd byte count for s16le)".into());
            }
            return Ok(ExitCode::SUCCESS);
        }
        let mut samples = Vec::with_capacity(n / 2 + 1);
        let mut chunk = &bytes[..n];
        if let Some(lo) = carry.take() {
            samples.push(i16::from_le_bytes([lo, chunk[0]]) as f64 / 32768.0);
            chunk = &chunk[1..];
        }
        for pair in chunk.chunks_exact(2) {
            samples.push(i16::from_le_bytes([pair[0], pair[1]]) as f64 / 32768.0);
        }
        if chunk.len() % 2 == 1 {
            carry = Some(chunk[chunk.len() - 1]);
        }
        for event in detector.push(&samples).map_err(|e| e.to_string())? {
            writeln!(output, "{}", event_line(&event)).map_err(|e| e.to_string())?;
            output.flush().map_err(|e| e.to_string())?;
        }
    }
}

fn cmd_eval(
    manifest: Option<&Path>,
    counts: Option<&str>,
    csv: bool,
    verdicts: bool,
    cfg: &DetectorConfig,
) -> Result<ExitCode, String> {
    let (cm, report, evaluated, skipped, lines) = match (manifest, counts) {
        (Some(path), None) => {
            let eval = evaluate_manifest(path, cfg).map_err(|e| e.to_string())?;
            let lines: Vec<String> = eval
                .verdicts
                .iter()
                .map(|v| {
                    let label = if v.label { "siren" } else { "nosiren" };
                    let predicted = match v.prediction {
                        Some(true) => "SIREN",
                        Some(false) => "NOSIREN",
                        None => "SKIPPED",
                    };
                    format!("{}\t{label}\t{predicted}\t{}", v.path.display(), v.detail)
                })
                .collect();
            let evaluated = eval.verdicts.len() - eval.skipped;
            (eval.cm, eval.report, evaluated, eval.skipped, lines)
        }
        (None, Some(counts)) => {
            let parts: Vec<&str> = counts.split(',').map(str::trim).collect();
            if parts.len() != 4 {
                return Err("--counts expects tp,fp,tn,fn".into());
            }
            let parse = |s: &str| s.parse::<usize>().map_err(|e| format!("--counts: {e}"));
            let cm = ConfusionMatrix::new(
                parse(parts[0])?,
                parse(parts[1])?,
                parse(parts[2])?,
                parse(parts[3])?,
            );
            let report = metrics(&cm).map_err(|e| e.to_string())?;
            (cm, report, cm.total(), 0, Vec::new())
        }
        _ => return Err("eval needs exactly one of --manifest or --counts".into()),
    };

    if verdicts {
        for line in &lines {
            println!("{line}");
        }
    }
    if csv {
        println!("{}", render_csv(&cm, &report));
    } else {
        print!("{}", render_report(&cm, &report, evaluated, skipped));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(what: SynthCmd) -> Result<ExitCode, String> {
    let (buf, out) = match what {
        SynthCmd::Siren {
            hi,
            lo,
            dwell,
            cycles,
            amp,
            snr,
            seed,
            dropout,
            rate,
            out,
        } => {
            let mut spec = SirenSpec::new(hi, lo, dwell, cycles).with_amplitude(amp);
            if let Some(snr_db) = snr {
                spec = spec.with_noise(snr_db, seed);
            }
            if let Some(dropout) = dropout {
                let (pos, len) = dropout
                    .split_once(',')
                    .ok_or("--dropout expects POS,LEN in seconds")?;
                let parse =
                    |s: &str| s.trim().parse::<f64>().map_err(|e| format!("--dropout: {e}"));
                spec = spec.with_dropout(parse(pos)?, parse(len)?);
            }
            (gen_siren(&spec, rate).map_err(|e| e.to_string())?, out)
        }
        SynthCmd::Tone {
            freq,
            dur,
            rate,
            out,
        } => (gen_tone(freq, dur, rate).map_err(|e| e.to_string())?, out),
        SynthCmd::Noise {
            dur,
            seed,
            rate,
            out,
        } => (gen_noise(dur, rate, seed).map_err(|e| e.to_string())?, out),
        SynthCmd::Sweep {
            from,
            to,
            dur,
            rate,
            out,
        } => (
            gen_sweep(from, to, dur, rate).map_err(|e| e.to_string())?,
            out,
        ),
    };
    write_file_atomically(&out, &encode_wav(&buf, SampleFormat::I16))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_dump(
    file: &Path,
    spectrogram: Option<&Path>,
    cfg: &DetectorConfig,
) -> Result<ExitCode, String> {
    println!("# effective config");
    print!("{}", cfg.to_kv());

    let buf = load_clip(file, cfg)?;
    if let Some(path) = spectrogram {
        let spec = log_mel(&buf, &cfg.mel).map_err(|e| e.to_string())?;
        write_file_atomically(path, spec.to_csv().as_bytes())?;
    }

    println!("# stages");
    let result: DetectionResult = detect_traced(&buf, cfg).map_err(|e| e.to_string())?;
    for line in result.stage_trace.iter().flatten() {
        println!("{line}");
    }
    let verdict = if result.detected { "SIREN" } else { "NOSIREN" };
    println!("# verdict");
    println!("{}\t{verdict}\t{}", file.display(), result.reject_reason);
    Ok(ExitCode::SUCCESS)
}

/// Write via a sibling temp file and rename, so failures never leave a
/// partial output file.
fn write_file_atomically(path: &Path, bytes: &[u8]) -> Result<(), String> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| format!("cannot write {}: {e}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| format!("cannot move {} into place: {e}", tmp.display()))?;
    Ok(())
}
