//! RIFF/WAVE codec for PCM payloads (8/16/24/32-bit integer, 32-bit float,
//! one or two channels). Stereo is averaged to mono on decode.

use super::{AudioBuffer, AudioError};

/// PCM sample encodings this codec reads and writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    U8,
    I16,
    I24,
    I32,
    F32,
}

impl SampleFormat {
    fn bits(self) -> u16 {
        match self {
            SampleFormat::U8 => 8,
            SampleFormat::I16 => 16,
            SampleFormat::I24 => 24,
            SampleFormat::I32 => 32,
            SampleFormat::F32 => 32,
        }
    }

    fn format_code(self) -> u16 {
        match self {
            SampleFormat::F32 => 3,
            _ => 1,
        }
    }
}

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

fn malformed(msg: impl Into<String>) -> AudioError {
    AudioError::MalformedContainer(msg.into())
}

fn read_u16(bytes: &[u8], at: usize) -> Result<u16, AudioError> {
    bytes
        .get(at..at + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| malformed("truncated field"))
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, AudioError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| malformed("truncated field"))
}

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

/// Decode a RIFF/WAVE byte stream into a normalized mono buffer.
///
/// Stereo frames are averaged per sample. Integer payloads are scaled by
/// the format's full-scale value (e.g. 32768 for 16-bit); float payloads
/// are clamped into [-1, 1].
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE header"));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4)? as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .ok_or_else(|| malformed("chunk size overflow"))?;
        if body_end > bytes.len() {
            return Err(malformed(format!(
                "chunk {:?} claims {} bytes past end of stream",
                String::from_utf8_lossy(id),
                body_end - bytes.len()
            )));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => data = Some(body),
            _ => {} // skip LIST, fact, cue, ... chunks
        }
        pos = body_end + (size & 1); // chunks are word-aligned
    }
    if pos != bytes.len() && pos + 8 > bytes.len() && pos < bytes.len() {
        return Err(malformed("trailing garbage after last chunk"));
    }

    let fmt = fmt.ok_or_else(|| malformed("missing fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("missing data chunk"))?;
    if fmt.sample_rate == 0 {
        return Err(malformed("zero sample rate"));
    }
    if fmt.channels == 0 || fmt.channels > 2 {
        return Err(AudioError::UnsupportedEncoding(format!(
            "{} channels (only mono and stereo are supported)",
            fmt.channels
        )));
    }

    let format = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 8) => SampleFormat::U8,
        (FORMAT_PCM, 16) => SampleFormat::I16,
        (FORMAT_PCM, 24) => SampleFormat::I24,
        (FORMAT_PCM, 32) => SampleFormat::I32,
        (FORMAT_IEEE_FLOAT, 32) => SampleFormat::F32,
        (code, bits) => {
            return Err(AudioError::UnsupportedEncoding(format!(
                "format code {code} with {bits} bits per sample"
            )))
        }
    };

    let bytes_per_sample = (format.bits() / 8) as usize;
    let frame_size = bytes_per_sample * fmt.channels as usize;
    if data.len() % frame_size != 0 {
        return Err(malformed("data chunk is not a whole number of frames"));
    }

    let n_frames = data.len() / frame_size;
    let mut samples = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let mut acc = 0.0;
        for c in 0..fmt.channels as usize {
            let at = f * frame_size + c * bytes_per_sample;
            acc += decode_sample(format, &data[at..at + bytes_per_sample]);
        }
        samples.push(acc / fmt.channels as f64);
    }

    Ok(AudioBuffer::new(samples, fmt.sample_rate))
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    if body.len() < 16 {
        return Err(malformed("fmt chunk shorter than 16 bytes"));
    }
    let mut format = read_u16(body, 0)?;
    let channels = read_u16(body, 2)?;
    let sample_rate = read_u32(body, 4)?;
    let bits = read_u16(body, 14)?;
    if format == FORMAT_EXTENSIBLE {
        // The real format code is the first word of the sub-format GUID.
        if body.len() < 26 {
            return Err(malformed("extensible fmt chunk truncated"));
        }
        format = read_u16(body, 24)?;
    }
    Ok(FmtChunk {
        format,
        channels,
        sample_rate,
        bits,
    })
}

fn decode_sample(format: SampleFormat, raw: &[u8]) -> f64 {
    match format {
        SampleFormat::U8 => (raw[0] as i16 - 128) as f64 / 128.0,
        SampleFormat::I16 => i16::from_le_bytes([raw[0], raw[1]]) as f64 / 32768.0,
        SampleFormat::I24 => {
            let v = i32::from_le_bytes([0, raw[0], raw[1], raw[2]]) >> 8;
            v as f64 / 8_388_608.0
        }
        SampleFormat::I32 => {
            i32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]) as f64 / 2_147_483_648.0
        }
        SampleFormat::F32 => {
            (f32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]) as f64).clamp(-1.0, 1.0)
        }
    }
}

/// Encode a mono buffer as a RIFF/WAVE byte stream in the given format.
///
/// Samples are clamped to [-1, 1] and quantized by the format's full-scale
/// value, so decode -> encode at the same depth is bit-exact.
pub fn encode_wav(buf: &AudioBuffer, format: SampleFormat) -> Vec<u8> {
    let bytes_per_sample = (format.bits() / 8) as usize;
    let data_len = buf.samples.len() * bytes_per_sample;
    let pad = data_len & 1;
    let fact_len = if format == SampleFormat::F32 { 12 } else { 0 };
    let riff_size = 4 + (8 + 16) + fact_len + 8 + data_len + pad;

    let mut out = Vec::with_capacity(8 + riff_size);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(riff_size as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");

    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.format_code().to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&buf.sample_rate.to_le_bytes());
    let byte_rate = buf.sample_rate * bytes_per_sample as u32;
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample as u16).to_le_bytes());
    out.extend_from_slice(&format.bits().to_le_bytes());

    if format == SampleFormat::F32 {
        out.extend_from_slice(b"fact");
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(&(buf.samples.len() as u32).to_le_bytes());
    }

    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &buf.samples {
        encode_sample(&mut out, format, s.clamp(-1.0, 1.0));
    }
    if pad == 1 {
        out.push(0);
    }
    out
}

fn encode_sample(out: &mut Vec<u8>, format: SampleFormat, s: f64) {
    match format {
        SampleFormat::U8 => {
            let q = ((s * 128.0).round() as i32 + 128).clamp(0, 255);
            out.push(q as u8);
        }
        SampleFormat::I16 => {
            let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            out.extend_from_slice(&q.to_le_bytes());
        }
        SampleFormat::I24 => {
            let q = (s * 8_388_608.0)
                .round()
                .clamp(-8_388_608.0, 8_388_607.0) as i32;
            out.extend_from_slice(&q.to_le_bytes()[0..3]);
        }
        SampleFormat::I32 => {
            let q = (s * 2_147_483_648.0)
                .round()
                .clamp(-2_147_483_648.0, 2_147_483_647.0) as i64 as i32;
            out.extend_from_slice(&q.to_le_bytes());
        }
        SampleFormat::F32 => {
            out.extend_from_slice(&(s as f32).to_le_bytes());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_from_i16(frames: &[&[i16]], channels: u16, rate: u32) -> Vec<u8> {
        let mut data = Vec::new();
        for frame in frames {
            assert_eq!(frame.len(), channels as usize);
            for &s in *frame {
                data.extend_from_slice(&s.to_le_bytes());
            }
        }
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data.len()) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * 2 * channels as u32).to_le_bytes());
        out.extend_from_slice(&(2 * channels).to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(&data);
        out
    }

    #[test]
    fn full_scale_16_bit_mono() {
        let bytes = wav_from_i16(&[&[32767]], 1, 44100);
        let buf = decode_wav(&bytes).unwrap();
        assert_eq!(buf.sample_rate, 44100);
        assert_eq!(buf.samples.len(), 1);
        assert!((buf.samples[0] - 32767.0 / 32768.0).abs() < 1e-12);
    }

    #[test]
    fn stereo_averages_to_mono() {
        let bytes = wav_from_i16(&[&[16384, -16384]], 2, 44100);
        let buf = decode_wav(&bytes).unwrap();
        assert_eq!(buf.samples, vec![0.0]);
    }

    #[test]
    fn four_seconds_at_44100() {
        let frames: Vec<Vec<i16>> = (0..176_400).map(|_| vec![0i16]).collect();
        let refs: Vec<&[i16]> = frames.iter().map(|f| f.as_slice()).collect();
        let bytes = wav_from_i16(&refs, 1, 44100);
        let buf = decode_wav(&bytes).unwrap();
        assert_eq!(buf.samples.len(), 176_400);
        assert!((buf.duration() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn bad_magic_is_malformed() {
        let err = decode_wav(b"RIFX\x00\x00\x00\x00WAVE").unwrap_err();
        assert!(matches!(err, AudioError::MalformedContainer(_)));
    }

    #[test]
    fn truncated_chunk_is_malformed() {
        let mut bytes = wav_from_i16(&[&[1], &[2], &[3]], 1, 8000);
        bytes.truncate(bytes.len() - 2);
        let err = decode_wav(&bytes).unwrap_err();
        assert!(matches!(err, AudioError::MalformedContainer(_)));
    }

    #[test]
    fn non_pcm_codec_is_unsupported() {
        let mut bytes = wav_from_i16(&[&[0]], 1, 8000);
        bytes[20] = 85; // MP3 format tag
        let err = decode_wav(&bytes).unwrap_err();
        assert!(matches!(err, AudioError::UnsupportedEncoding(_)));
    }

    #[test]
    fn three_channels_is_unsupported() {
        let bytes = wav_from_i16(&[&[0, 0, 0]], 3, 8000);
        let err = decode_wav(&bytes).unwrap_err();
        assert!(matches!(err, AudioError::UnsupportedEncoding(_)));
    }

    #[test]
    fn round_trip_is_bit_identical_per_depth() {
        let samples: Vec<f64> = (0..999)
            .map(|i| ((i * 2654435761u64 as usize) as f64 / usize::MAX as f64) * 1.9 - 0.95)
            .collect();
        let src = AudioBuffer::new(samples, 22050);
        for format in [
            SampleFormat::U8,
            SampleFormat::I16,
            SampleFormat::I24,
            SampleFormat::I32,
            SampleFormat::F32,
        ] {
            let once = decode_wav(&encode_wav(&src, format)).unwrap();
            let twice = decode_wav(&encode_wav(&once, format)).unwrap();
            assert_eq!(once.samples, twice.samples, "{format:?}");
            assert_eq!(once.sample_rate, twice.sample_rate);
        }
    }

    #[test]
    fn extensible_fmt_is_decoded() {
        // 16-bit PCM wrapped in WAVE_FORMAT_EXTENSIBLE.
        let mut fmt = Vec::new();
        fmt.extend_from_slice(&0xFFFEu16.to_le_bytes());
        fmt.extend_from_slice(&1u16.to_le_bytes());
        fmt.extend_from_slice(&16000u32.to_le_bytes());
        fmt.extend_from_slice(&32000u32.to_le_bytes());
        fmt.extend_from_slice(&2u16.to_le_bytes());
        fmt.extend_from_slice(&16u16.to_le_bytes());
        fmt.extend_from_slice(&22u16.to_le_bytes()); // cbSize
        fmt.extend_from_slice(&16u16.to_le_bytes()); // valid bits
        fmt.extend_from_slice(&4u32.to_le_bytes()); // channel mask
        fmt.extend_from_slice(&1u16.to_le_bytes()); // sub-format: PCM
        fmt.extend_from_slice(&[0u8; 14]);
        let data = 12345i16.to_le_bytes();
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&((4 + 8 + fmt.len() + 8 + data.len()) as u32).to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&(fmt.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&fmt);
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&(data.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&data);

        let buf = decode_wav(&bytes).unwrap();
        assert_eq!(buf.sample_rate, 16000);
        assert!((buf.samples[0] - 12345.0 / 32768.0).abs() < 1e-12);
    }
}
