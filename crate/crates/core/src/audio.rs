//! WAVE input/output, resampling and framing.
//!
//! Everything downstream works on [`AudioBuffer`], a mono `f64` signal in
//! `[-1, 1]`. Files are decoded from 16-bit PCM or 32-bit float RIFF/WAVE,
//! stereo is averaged to mono, and [`resample`] brings any rate to the
//! pipeline rate.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate every feature pipeline runs at.
pub const CANONICAL_RATE: u32 = 16_000;

/// Mono signal with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Validates that every sample is finite and within `[-1, 1]`.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidAudio("sample rate must be positive".into()));
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::InvalidAudio(format!(
                "sample {pos} = {} is outside [-1, 1]",
                samples[pos]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Read a RIFF/WAVE file into a mono buffer at the file's own rate.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decode an in-memory RIFF/WAVE image.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    if bytes.len() < 12 {
        return Err(Error::MalformedRiff("file shorter than RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(Error::MalformedRiff(format!(
            "expected RIFF magic, found {:?}",
            String::from_utf8_lossy(&bytes[0..4])
        )));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::MalformedRiff("missing WAVE form type".into()));
    }
    let riff_size = le_u32(bytes, 4) as usize;
    if riff_size < 4 {
        return Err(Error::MalformedRiff(format!(
            "RIFF size {riff_size} too small"
        )));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + size > bytes.len() {
                    return Err(Error::MalformedRiff(format!("fmt chunk of size {size}")));
                }
                let mut format = le_u16(bytes, body);
                if format == FORMAT_EXTENSIBLE {
                    // sub-format GUID starts 24 bytes into the extensible fmt body
                    if size < 40 {
                        return Err(Error::MalformedRiff("short WAVE_FORMAT_EXTENSIBLE".into()));
                    }
                    format = le_u16(bytes, body + 24);
                }
                fmt = Some(FmtChunk {
                    format,
                    channels: le_u16(bytes, body + 2),
                    sample_rate: le_u32(bytes, body + 4),
                    bits: le_u16(bytes, body + 14),
                });
            }
            b"data" => {
                let fmt = fmt
                    .as_ref()
                    .ok_or_else(|| Error::MalformedRiff("data chunk before fmt chunk".into()))?;
                let available = bytes.len() - body;
                if size > available {
                    return Err(Error::TruncatedData {
                        declared: size,
                        available,
                    });
                }
                return decode_samples(fmt, &bytes[body..body + size]);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }
    Err(Error::MalformedRiff(if fmt.is_none() {
        "no fmt chunk".into()
    } else {
        "no data chunk".into()
    }))
}

fn decode_samples(fmt: &FmtChunk, data: &[u8]) -> Result<AudioBuffer> {
    let channels = match fmt.channels {
        1 | 2 => fmt.channels as usize,
        n => return Err(Error::UnsupportedEncoding(format!("{n} channels"))),
    };
    if fmt.sample_rate == 0 {
        return Err(Error::MalformedRiff("sample rate 0".into()));
    }
    let width = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_IEEE_FLOAT, 32) => 4,
        (FORMAT_PCM | FORMAT_IEEE_FLOAT, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "format {} with {bits} bits per sample",
                fmt.format
            )))
        }
        (code, _) => return Err(Error::UnsupportedEncoding(format!("format code {code}"))),
    };
    let frame_bytes = width * channels;
    let samples = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(width)
                .map(|s| {
                    if width == 2 {
                        i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0
                    } else {
                        let v = f32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64;
                        if v.is_finite() {
                            v.clamp(-1.0, 1.0)
                        } else {
                            0.0
                        }
                    }
                })
                .sum();
            sum / channels as f64
        })
        .collect();
    AudioBuffer::new(samples, fmt.sample_rate)
}

/// Encode a buffer as mono 16-bit PCM WAVE.
pub fn encode_wav_pcm16(buf: &AudioBuffer) -> Vec<u8> {
    let data_len = buf.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buf.sample_rate.to_le_bytes());
    out.extend_from_slice(&(buf.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &buf.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

/// Write a buffer as mono 16-bit PCM WAVE.
pub fn write_wav_pcm16(path: impl AsRef<Path>, buf: &AudioBuffer) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&encode_wav_pcm16(buf))
        .map_err(|e| Error::io(path, e))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zero crossings of the sinc kernel kept on each side of the centre.
const SINC_ZERO_CROSSINGS: f64 = 16.0;

fn blackman(x: f64) -> f64 {
    // x in [-1, 1]
    let t = PI * (x + 1.0);
    0.42 - 0.5 * t.cos() + 0.08 * (2.0 * t).cos()
}

/// Band-limited rate conversion by a windowed-sinc polyphase filter.
///
/// The low-pass cutoff sits at 0.45 times the lower of the two sample rates.
/// Output length is `round(N * target / source)`.
pub fn resample(buf: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::InvalidAudio("target rate must be positive".into()));
    }
    let src_rate = buf.sample_rate;
    if src_rate == target_rate {
        return Ok(buf.clone());
    }
    let g = gcd(src_rate as u64, target_rate as u64);
    let up = (target_rate as u64 / g) as usize;
    let down = src_rate as u64 / g;

    // cutoff in cycles per input sample
    let cutoff = 0.45 * src_rate.min(target_rate) as f64 / src_rate as f64;
    let half_width = SINC_ZERO_CROSSINGS / (2.0 * cutoff);
    let taps_each_side = half_width.ceil() as isize;

    // one normalized kernel per output phase
    let phases: Vec<Vec<f64>> = (0..up)
        .map(|phase| {
            let frac = phase as f64 / up as f64;
            let mut taps: Vec<f64> = (-taps_each_side..=taps_each_side + 1)
                .map(|k| {
                    let dist = frac - k as f64;
                    if dist.abs() >= half_width {
                        return 0.0;
                    }
                    let arg = 2.0 * cutoff * dist;
                    let sinc = if arg == 0.0 {
                        1.0
                    } else {
                        (PI * arg).sin() / (PI * arg)
                    };
                    2.0 * cutoff * sinc * blackman(dist / half_width)
                })
                .collect();
            let sum: f64 = taps.iter().sum();
            taps.iter_mut().for_each(|t| *t /= sum);
            taps
        })
        .collect();

    let n_in = buf.len();
    let n_out = ((n_in as f64) * target_rate as f64 / src_rate as f64).round() as usize;
    let x = &buf.samples;
    let out = (0..n_out)
        .map(|n| {
            let pos = n as u64 * down;
            let base = (pos / up as u64) as isize;
            let taps = &phases[(pos % up as u64) as usize];
            let acc: f64 = taps
                .iter()
                .enumerate()
                .filter_map(|(j, &w)| {
                    let idx = base + j as isize - taps_each_side;
                    (idx >= 0 && (idx as usize) < n_in).then(|| w * x[idx as usize])
                })
                .sum();
            acc.clamp(-1.0, 1.0)
        })
        .collect();
    AudioBuffer::new(out, target_rate)
}

/// Resample to [`CANONICAL_RATE`] unless already there.
pub fn to_canonical_rate(buf: AudioBuffer) -> Result<AudioBuffer> {
    if buf.sample_rate == CANONICAL_RATE {
        Ok(buf)
    } else {
        resample(&buf, CANONICAL_RATE)
    }
}

/// Fixed-length frames cut from a signal at a regular hop.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    data: Vec<f64>,
    num_frames: usize,
    frame_len: usize,
    hop: usize,
    sample_rate: u32,
}

impl FrameSeries {
    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.frame_len..(i + 1) * self.frame_len]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data
            .chunks_exact(self.frame_len.max(1))
            .take(self.num_frames)
    }
}

/// Number of complete frames that fit in `n` samples.
pub fn frame_count(n: usize, frame_len: usize, hop: usize) -> usize {
    if n < frame_len || frame_len == 0 || hop == 0 {
        0
    } else {
        (n - frame_len) / hop + 1
    }
}

/// Cut frame `i` from samples `[i*hop, i*hop + frame_len)`. A partial trailing frame is dropped.
pub fn frame_signal(buf: &AudioBuffer, frame_len: usize, hop: usize) -> Result<FrameSeries> {
    if frame_len == 0 || hop == 0 {
        return Err(Error::InvalidConfig(
            "frame length and hop must be at least 1".into(),
        ));
    }
    let num_frames = frame_count(buf.len(), frame_len, hop);
    let mut data = Vec::with_capacity(num_frames * frame_len);
    for i in 0..num_frames {
        data.extend_from_slice(&buf.samples[i * hop..i * hop + frame_len]);
    }
    Ok(FrameSeries {
        data,
        num_frames,
        frame_len,
        hop,
        sample_rate: buf.sample_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hann,
    Hamming,
    Rect,
}

impl WindowKind {
    /// Symmetric window coefficients; Hann is exactly zero at both ends.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        if len == 1 {
            return vec![1.0];
        }
        let denom = (len - 1) as f64;
        (0..len)
            .map(|n| {
                let c = (2.0 * PI * n as f64 / denom).cos();
                match self {
                    WindowKind::Hann => 0.5 - 0.5 * c,
                    WindowKind::Hamming => 0.54 - 0.46 * c,
                    WindowKind::Rect => 1.0,
                }
            })
            .collect()
    }
}

pub fn apply_window(frames: &FrameSeries, kind: WindowKind) -> FrameSeries {
    let window = kind.coefficients(frames.frame_len);
    let data = frames
        .data
        .chunks_exact(frames.frame_len.max(1))
        .flat_map(|f| f.iter().zip(&window).map(|(x, w)| x * w))
        .collect();
    FrameSeries {
        data,
        ..frames.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: u32, n: usize, amp: f64) -> AudioBuffer {
        let s = (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect();
        AudioBuffer::new(s, rate).unwrap()
    }

    fn stereo_pcm16(left: i16, right: i16, frames: usize) -> Vec<u8> {
        let data_len = frames * 4;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes());
        out.extend_from_slice(&16000u32.to_le_bytes());
        out.extend_from_slice(&64000u32.to_le_bytes());
        out.extend_from_slice(&4u16.to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data_len as u32).to_le_bytes());
        for _ in 0..frames {
            out.extend_from_slice(&left.to_le_bytes());
            out.extend_from_slice(&right.to_le_bytes());
        }
        out
    }

    #[test]
    fn pcm16_mono_read_keeps_length_and_rate() {
        let buf = sine(300.0, 16000, 32000, 0.5);
        let decoded = decode_wav(&encode_wav_pcm16(&buf)).unwrap();
        assert_eq!(decoded.len(), 32000);
        assert_eq!(decoded.sample_rate(), 16000);
    }

    #[test]
    fn stereo_channels_are_averaged() {
        let decoded = decode_wav(&stereo_pcm16(16384, -16384, 100)).unwrap();
        assert_eq!(decoded.len(), 100);
        assert!(decoded.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn rifx_magic_is_malformed() {
        let mut bytes = encode_wav_pcm16(&sine(100.0, 16000, 10, 0.1));
        bytes[3] = b'X';
        assert!(matches!(decode_wav(&bytes), Err(Error::MalformedRiff(_))));
    }

    #[test]
    fn compressed_format_is_unsupported() {
        let mut bytes = encode_wav_pcm16(&sine(100.0, 16000, 10, 0.1));
        // format code 2 (ADPCM)
        bytes[20] = 2;
        assert!(matches!(
            decode_wav(&bytes),
            Err(Error::UnsupportedEncoding(_))
        ));
    }

    #[test]
    fn short_data_chunk_is_truncated() {
        let bytes = encode_wav_pcm16(&sine(100.0, 16000, 100, 0.1));
        let cut = &bytes[..bytes.len() - 10];
        assert!(matches!(
            decode_wav(cut),
            Err(Error::TruncatedData {
                declared: 200,
                available: 190
            })
        ));
    }

    #[test]
    fn float32_is_decoded() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36 + 8u32).to_le_bytes());
        bytes.extend_from_slice(b"WAVEfmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&3u16.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&8000u32.to_le_bytes());
        bytes.extend_from_slice(&32000u32.to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&32u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&8u32.to_le_bytes());
        bytes.extend_from_slice(&0.25f32.to_le_bytes());
        bytes.extend_from_slice(&(-0.75f32).to_le_bytes());
        let buf = decode_wav(&bytes).unwrap();
        assert_eq!(buf.samples(), &[0.25, -0.75]);
        assert_eq!(buf.sample_rate(), 8000);
    }

    #[test]
    fn unknown_chunks_are_skipped() {
        let plain = encode_wav_pcm16(&sine(100.0, 16000, 20, 0.3));
        let mut bytes = plain[..12].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 0]); // odd size + pad byte
        bytes.extend_from_slice(&plain[12..]);
        assert_eq!(decode_wav(&bytes).unwrap(), decode_wav(&plain).unwrap());
    }

    #[test]
    fn same_rate_resample_is_identity() {
        let buf = sine(440.0, 16000, 1000, 0.7);
        assert_eq!(resample(&buf, 16000).unwrap(), buf);
    }

    #[test]
    fn upsampled_length_follows_ratio() {
        let buf = sine(440.0, 8000, 8000, 0.7);
        let out = resample(&buf, 16000).unwrap();
        assert!((out.len() as i64 - 16000).abs() <= 1);
        assert_eq!(out.sample_rate(), 16000);
    }

    #[test]
    fn frame_counts() {
        let mk = |n| AudioBuffer::new(vec![0.0; n], 16000).unwrap();
        assert_eq!(frame_signal(&mk(400), 400, 160).unwrap().num_frames(), 1);
        assert_eq!(
            frame_signal(&mk(32000), 400, 160).unwrap().num_frames(),
            198
        );
        assert_eq!(frame_signal(&mk(100), 400, 160).unwrap().num_frames(), 0);
    }

    #[test]
    fn frames_at_full_hop_tile_the_signal() {
        let buf = AudioBuffer::new((0..1000).map(|i| i as f64 / 1000.0).collect(), 16000).unwrap();
        let frames = frame_signal(&buf, 128, 128).unwrap();
        let joined: Vec<f64> = frames.frames().flatten().copied().collect();
        assert_eq!(joined.len(), 7 * 128);
        assert_eq!(&joined[..], &buf.samples()[..joined.len()]);
    }

    #[test]
    fn windows() {
        let buf = AudioBuffer::new(vec![1.0; 64], 16000).unwrap();
        let frames = frame_signal(&buf, 64, 64).unwrap();
        assert_eq!(apply_window(&frames, WindowKind::Rect), frames);
        let hann = apply_window(&frames, WindowKind::Hann);
        assert_eq!(hann.frame(0), &WindowKind::Hann.coefficients(64)[..]);
        assert_eq!(hann.frame(0)[0], 0.0);
        assert!(hann.frame(0)[63].abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range_samples() {
        assert!(AudioBuffer::new(vec![1.5], 16000).is_err());
        assert!(AudioBuffer::new(vec![f64::NAN], 16000).is_err());
        assert!(AudioBuffer::new(vec![0.0], 0).is_err());
    }
}
