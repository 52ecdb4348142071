//! PCM WAV reading and writing (RIFF containers, no compression).

use std::io::Write;
use std::path::Path;

use super::Waveform;
use crate::error::{Error, Result};

fn le_u16(b: &[u8], off: usize) -> Result<u16> {
    b.get(off..off + 2)
        .map(|s| u16::from_le_bytes(s.try_into().unwrap()))
        .ok_or_else(|| Error::Format("truncated WAV chunk".into()))
}

fn le_u32(b: &[u8], off: usize) -> Result<u32> {
    b.get(off..off + 4)
        .map(|s| u32::from_le_bytes(s.try_into().unwrap()))
        .ok_or_else(|| Error::Format("truncated WAV chunk".into()))
}

/// Decodes a PCM WAV file (8/16/32-bit integer or 32-bit float, any channel
/// count). Multichannel input is averaged to mono; integer samples are scaled
/// to [-1, 1]. The source sample rate is preserved.
pub fn load_wav(path: &Path) -> Result<Waveform> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format(format!("{}: not a RIFF/WAVE file", path.display())));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut off = 12usize;
    while off + 8 <= bytes.len() {
        let id = &bytes[off..off + 4];
        let size = le_u32(&bytes, off + 4)? as usize;
        let body_start = off + 8;
        if body_start + size > bytes.len() {
            return Err(Error::Format(format!("{}: chunk overruns file", path.display())));
        }
        let body = &bytes[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::Format("fmt chunk too small".into()));
                }
                let mut format = le_u16(body, 0)?;
                let channels = le_u16(body, 2)?;
                let rate = le_u32(body, 4)?;
                let bits = le_u16(body, 14)?;
                // WAVE_FORMAT_EXTENSIBLE carries the real format in the extension
                if format == 0xFFFE && size >= 26 {
                    format = le_u16(body, 24)?;
                }
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        off = body_start + size + (size & 1); // chunks are word-aligned
    }

    let (format, channels, rate, bits) =
        fmt.ok_or_else(|| Error::Format(format!("{}: missing fmt chunk", path.display())))?;
    let data = data.ok_or_else(|| Error::Format(format!("{}: missing data chunk", path.display())))?;
    if channels == 0 || rate == 0 {
        return Err(Error::Format("fmt chunk declares zero channels or rate".into()));
    }

    let decode_frame: fn(&[u8]) -> f64 = match (format, bits) {
        (1, 8) => |b| (f64::from(b[0]) - 128.0) / 128.0,
        (1, 16) => |b| f64::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0,
        (1, 32) => |b| f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])) / 2147483648.0,
        (3, 32) => |b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
        _ => {
            return Err(Error::Unsupported(format!(
                "WAV encoding format={format} bits={bits} (supported: PCM 8/16/32-bit int, 32-bit float)"
            )))
        }
    };

    let bytes_per_sample = (bits / 8) as usize;
    let frame_bytes = bytes_per_sample * channels as usize;
    if frame_bytes == 0 || data.len() % frame_bytes != 0 {
        return Err(Error::Format("data chunk size is not a whole number of frames".into()));
    }
    let n_frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let mut acc = 0.0f64;
        for c in 0..channels as usize {
            let start = f * frame_bytes + c * bytes_per_sample;
            acc += decode_frame(&data[start..start + bytes_per_sample]);
        }
        samples.push((acc / f64::from(channels)) as f32);
    }
    Waveform::new(samples, rate)
}

/// Writes mono 16-bit PCM. Samples are clamped to [-1, 1] and scaled by 32767.
pub fn write_wav_16bit(path: &Path, samples: &[f32], sample_rate_hz: u32) -> Result<()> {
    let n = samples.len();
    let data_bytes = (n * 2) as u32;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(b"RIFF")?;
    out.write_all(&(36 + data_bytes).to_le_bytes())?;
    out.write_all(b"WAVE")?;
    out.write_all(b"fmt ")?;
    out.write_all(&16u32.to_le_bytes())?;
    out.write_all(&1u16.to_le_bytes())?; // PCM
    out.write_all(&1u16.to_le_bytes())?; // mono
    out.write_all(&sample_rate_hz.to_le_bytes())?;
    out.write_all(&(sample_rate_hz * 2).to_le_bytes())?; // byte rate
    out.write_all(&2u16.to_le_bytes())?; // block align
    out.write_all(&16u16.to_le_bytes())?;
    out.write_all(b"data")?;
    out.write_all(&data_bytes.to_le_bytes())?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}
