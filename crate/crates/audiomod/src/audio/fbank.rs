//! Short-time analysis: framing, power spectra, and the mel filterbank.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{FbankConfig, FeatureMatrix, Waveform};
use crate::error::{Error, Result};

/// Natural log floor applied to filterbank energies; silence maps to
/// `ln(1e-10)` instead of negative infinity.
pub const LOG_FLOOR: f64 = 1e-10;

fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0)).cos())
        .collect()
}

/// Number of frames for `num_samples` under `cfg`, when at least one window fits.
pub fn frame_count(num_samples: usize, cfg: &FbankConfig) -> Option<usize> {
    let win = cfg.window_samples();
    let hop = cfg.hop_samples();
    if num_samples < win {
        None
    } else {
        Some(1 + (num_samples - win) / hop)
    }
}

/// Slices the waveform into Hamming-windowed frames, zero-padded to
/// `fft_size`. Frame `t` starts at `t * hop` samples.
pub fn frame_and_window(w: &Waveform, cfg: &FbankConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let win = cfg.window_samples();
    let hop = cfg.hop_samples();
    let n = w.len();
    let Some(t_total) = frame_count(n, cfg) else {
        return Err(Error::Data(format!(
            "audio too short: {n} samples, window needs {win}"
        )));
    };
    let window = hamming(win);
    let samples = w.samples();
    let mut frames = Vec::with_capacity(t_total);
    for t in 0..t_total {
        let start = t * hop;
        let mut frame = vec![0.0f64; cfg.fft_size];
        for i in 0..win {
            frame[i] = f64::from(samples[start + i]) * window[i];
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Squared-magnitude spectrum |DFT_k|^2 for k in 0..=fft_size/2.
pub fn power_spectrum(frame: &[f64], fft_size: usize) -> Vec<f64> {
    assert_eq!(frame.len(), fft_size, "frame must already be padded to fft_size");
    let mut planner = FftPlanner::new();
    power_spectrum_with(&mut planner, frame, fft_size)
}

fn power_spectrum_with(planner: &mut FftPlanner<f64>, frame: &[f64], fft_size: usize) -> Vec<f64> {
    let fft = planner.plan_fft_forward(fft_size);
    let mut buf: Vec<Complex<f64>> = frame.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    buf[..=fft_size / 2].iter().map(|c| c.norm_sqr()).collect()
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank, `n_mels x (fft_size/2 + 1)` row-major. Centers
/// are equally spaced on the mel scale `2595 * log10(1 + f/700)` between
/// `fmin_hz` and `fmax_hz`; peak weight is 1 at each center.
pub fn mel_filterbank_matrix(cfg: &FbankConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n_bins = cfg.n_bins();
    let mel_lo = hz_to_mel(cfg.fmin_hz);
    let mel_hi = hz_to_mel(cfg.fmax_hz);
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = f64::from(cfg.sample_rate_hz) / cfg.fft_size as f64;
    let mut mat = vec![0.0f64; cfg.n_mels * n_bins];
    for m in 0..cfg.n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut any_positive = false;
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let rise = if center > left { (f - left) / (center - left) } else { 0.0 };
            let fall = if right > center { (right - f) / (right - center) } else { 0.0 };
            let w = rise.min(fall).max(0.0);
            if w > 0.0 {
                any_positive = true;
            }
            mat[m * n_bins + k] = w;
        }
        if !any_positive {
            return Err(Error::Config(format!(
                "audio.n_mels={} too large for fft_size={}: filter {m} covers no FFT bin",
                cfg.n_mels, cfg.fft_size
            )));
        }
    }
    Ok(mat)
}

/// Full front end: frames -> power spectra -> mel energies -> natural log
/// with floor. The waveform must already be at the configured rate.
pub fn log_fbank(w: &Waveform, cfg: &FbankConfig) -> Result<FeatureMatrix> {
    if w.sample_rate_hz() != cfg.sample_rate_hz {
        return Err(Error::Config(format!(
            "waveform at {} Hz but config expects {} Hz; resample first",
            w.sample_rate_hz(),
            cfg.sample_rate_hz
        )));
    }
    let frames = frame_and_window(w, cfg)?;
    let filters = mel_filterbank_matrix(cfg)?;
    let n_bins = cfg.n_bins();
    let mut planner = FftPlanner::new();
    let mut out = Vec::with_capacity(frames.len() * cfg.n_mels);
    for frame in &frames {
        let spec = power_spectrum_with(&mut planner, frame, cfg.fft_size);
        for m in 0..cfg.n_mels {
            let row = &filters[m * n_bins..(m + 1) * n_bins];
            let e: f64 = row.iter().zip(&spec).map(|(&a, &b)| a * b).sum();
            out.push(e.max(LOG_FLOOR).ln() as f32);
        }
    }
    Ok(FeatureMatrix::new(frames.len(), cfg.n_mels, out))
}
