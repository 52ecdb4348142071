//! Audio front end: WAV decoding, resampling, and 80-dim log filterbanks.

mod fbank;
mod resample;
mod wav;

pub use fbank::{frame_and_window, log_fbank, mel_filterbank_matrix, power_spectrum};
pub use resample::resample;
pub use wav::{load_wav, write_wav_16bit};

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Mono audio buffer with amplitudes in [-1, 1].
#[derive(Debug, Clone)]
pub struct Waveform {
    samples: Vec<f32>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Data("waveform must not be empty".into()));
        }
        if sample_rate_hz == 0 {
            return Err(Error::Data("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Data("waveform contains non-finite samples".into()));
        }
        Ok(Waveform { samples, sample_rate_hz })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }
}

/// Filterbank extraction settings. Defaults: 16 kHz, 20 ms Hamming window,
/// 10 ms hop, 512-point FFT, 80 mel filters over 0..8000 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct FbankConfig {
    pub sample_rate_hz: u32,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub n_mels: usize,
    pub fft_size: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl Default for FbankConfig {
    fn default() -> Self {
        FbankConfig {
            sample_rate_hz: 16_000,
            window_ms: 20.0,
            hop_ms: 10.0,
            n_mels: 80,
            fft_size: 512,
            fmin_hz: 0.0,
            fmax_hz: 8_000.0,
        }
    }
}

impl FbankConfig {
    pub fn window_samples(&self) -> usize {
        (f64::from(self.sample_rate_hz) * self.window_ms / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (f64::from(self.sample_rate_hz) * self.hop_ms / 1000.0).round() as usize
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            return Err(Error::Config("audio.sample_rate must be positive".into()));
        }
        if self.window_samples() == 0 || self.hop_samples() == 0 {
            return Err(Error::Config("window and hop must be positive".into()));
        }
        if self.fft_size < self.window_samples() {
            return Err(Error::Config(format!(
                "audio.fft_size {} smaller than window of {} samples",
                self.fft_size,
                self.window_samples()
            )));
        }
        if self.n_mels < 1 {
            return Err(Error::Config("audio.n_mels must be at least 1".into()));
        }
        let nyquist = f64::from(self.sample_rate_hz) / 2.0;
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < self.fmax_hz && self.fmax_hz <= nyquist) {
            return Err(Error::Config(format!(
                "mel range [{}, {}] must satisfy 0 <= fmin < fmax <= {}",
                self.fmin_hz, self.fmax_hz, nyquist
            )));
        }
        Ok(())
    }
}

/// `T x n_mels` grid of log filterbank energies for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f32>,
    t: usize,
    n_mels: usize,
}

impl FeatureMatrix {
    pub fn new(t: usize, n_mels: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), t * n_mels);
        FeatureMatrix { data, t, n_mels }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    /// Flat row-major data, frame-major.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * self.n_mels..(t + 1) * self.n_mels]
    }
}

const FEATURE_MAGIC: &[u8; 4] = b"AFB1";

/// Writes a feature matrix: magic "AFB1", u32 T, u32 n_mels, then T*n_mels
/// little-endian f32 values row-major.
pub fn write_features(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(FEATURE_MAGIC)?;
    out.write_all(&(m.t as u32).to_le_bytes())?;
    out.write_all(&(m.n_mels as u32).to_le_bytes())?;
    for v in &m.data {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[0..4] != FEATURE_MAGIC {
        return Err(Error::Format(format!("{} is not a feature file", path.display())));
    }
    let t = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let n_mels = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expect = 12 + t * n_mels * 4;
    if bytes.len() != expect {
        return Err(Error::Format(format!(
            "feature file {} has {} bytes, expected {expect}",
            path.display(),
            bytes.len()
        )));
    }
    let data = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(FeatureMatrix::new(t, n_mels, data))
}
