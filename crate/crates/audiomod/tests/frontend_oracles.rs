//! Front-end checks against the naive DFT oracle and closed-form values.

mod common;

use audiomod::audio::{
    frame_and_window, log_fbank, mel_filterbank_matrix, power_spectrum, resample, FbankConfig,
    Waveform,
};
use common::{max_rel_diff, naive_power_spectrum, rand_vec, rng};
use proptest::prelude::*;
use rand::Rng;

fn tone(freq: f64, duration_s: f64, rate: u32, amp: f64) -> Waveform {
    let n = (duration_s * f64::from(rate)).round() as usize;
    let samples: Vec<f32> = (0..n)
        .map(|i| (amp * (2.0 * std::f64::consts::PI * freq * i as f64 / f64::from(rate)).sin()) as f32)
        .collect();
    Waveform::new(samples, rate).unwrap()
}

#[test]
fn power_spectrum_matches_naive_dft_on_random_frames() {
    let mut r = rng(100);
    for trial in 0..8 {
        let fft_size = [64, 128, 256, 512][trial % 4];
        let frame = rand_vec(&mut r, fft_size, -1.0, 1.0);
        let fast = power_spectrum(&frame, fft_size);
        let slow = naive_power_spectrum(&frame);
        // relative on bins with energy; pure round-off bins compared absolutely
        for (k, (a, b)) in fast.iter().zip(&slow).enumerate() {
            let denom = a.abs().max(b.abs());
            if denom > 1e-9 {
                assert!(
                    (a - b).abs() / denom < 1e-6,
                    "fft={fft_size} bin {k}: {a} vs {b}"
                );
            } else {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn tone_argmax_mel_bin_matches_matrix_oracle() {
    let cfg = FbankConfig::default();
    let wav = tone(1000.0, 1.0, 16000, 0.5);
    let features = log_fbank(&wav, &cfg).unwrap();

    // oracle route: explicit matrix times naive-DFT spectrum, frame by frame
    let mat = mel_filterbank_matrix(&cfg).unwrap();
    let n_bins = cfg.n_bins();
    let frames = frame_and_window(&wav, &cfg).unwrap();
    let oracle_argmax: Vec<usize> = frames
        .iter()
        .map(|frame| {
            let spec = naive_power_spectrum(frame);
            (0..cfg.n_mels)
                .map(|m| {
                    mat[m * n_bins..(m + 1) * n_bins]
                        .iter()
                        .zip(&spec)
                        .map(|(&a, &b)| a * b)
                        .sum::<f64>()
                })
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap()
                .0
        })
        .collect();

    let mut impl_argmax = Vec::new();
    for t in 0..features.t() {
        let row = features.frame(t);
        let best = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        impl_argmax.push(best);
    }
    assert_eq!(impl_argmax, oracle_argmax);
    // constant across frames for a steady tone
    assert!(impl_argmax.windows(2).all(|w| w[0] == w[1]));
    // and near the filter whose center is closest to 1 kHz
    let center_bin = impl_argmax[0];
    let peak_bin_hz = (0..n_bins)
        .max_by(|&a, &b| {
            mat[center_bin * n_bins + a]
                .partial_cmp(&mat[center_bin * n_bins + b])
                .unwrap()
        })
        .unwrap() as f64
        * 16000.0
        / cfg.fft_size as f64;
    assert!((peak_bin_hz - 1000.0).abs() < 150.0, "peak at {peak_bin_hz} Hz");
}

#[test]
fn resampled_tone_keeps_its_dominant_frequency() {
    // 1 s of 100 Hz at 8 kHz upsampled to 16 kHz
    let wav = tone(100.0, 1.0, 8000, 0.5);
    let up = resample(&wav, 16000);
    assert_eq!(up.len(), 16000);
    let frame: Vec<f64> = up.samples()[..4096].iter().map(|&v| f64::from(v)).collect();
    let spec = naive_power_spectrum(&frame);
    let peak = spec
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    let peak_hz = peak as f64 * 16000.0 / 4096.0;
    assert!((peak_hz - 100.0).abs() < 8.0, "dominant bin at {peak_hz} Hz");
}

#[test]
fn silence_hits_log_floor_exactly() {
    let cfg = FbankConfig::default();
    let wav = Waveform::new(vec![0.0f32; 16000], 16000).unwrap();
    let features = log_fbank(&wav, &cfg).unwrap();
    let floor = (1e-10f64).ln() as f32;
    assert_eq!(features.t(), 99);
    assert!(features.data().iter().all(|&v| v == floor));
}

#[test]
fn log_fbank_is_always_finite() {
    let mut r = rng(7);
    for _ in 0..5 {
        let n = r.gen_range(320..20000);
        let samples: Vec<f32> = (0..n).map(|_| r.gen_range(-1.0f32..1.0)).collect();
        let wav = Waveform::new(samples, 16000).unwrap();
        let features = log_fbank(&wav, &FbankConfig::default()).unwrap();
        assert!(features.data().iter().all(|v| v.is_finite()));
    }
}

#[test]
fn filterbank_rows_are_unimodal() {
    let cfg = FbankConfig::default();
    let mat = mel_filterbank_matrix(&cfg).unwrap();
    let n_bins = cfg.n_bins();
    for m in 0..cfg.n_mels {
        let row = &mat[m * n_bins..(m + 1) * n_bins];
        assert!(row.iter().all(|&v| v >= 0.0));
        let peak = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        for k in 1..=peak {
            assert!(row[k] >= row[k - 1] - 1e-12, "row {m} dips before peak");
        }
        for k in peak + 1..n_bins {
            assert!(row[k] <= row[k - 1] + 1e-12, "row {m} rises after peak");
        }
    }
}

#[test]
fn downsampling_preserves_tone_and_length() {
    let wav = tone(440.0, 0.5, 48000, 0.4);
    let down = resample(&wav, 16000);
    assert!((down.len() as i64 - 8000).unsigned_abs() <= 1);
    let frame: Vec<f64> = down.samples()[..4096].iter().map(|&v| f64::from(v)).collect();
    let spec = naive_power_spectrum(&frame);
    let peak = spec
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    let peak_hz = peak as f64 * 16000.0 / 4096.0;
    assert!((peak_hz - 440.0).abs() < 8.0, "dominant bin at {peak_hz} Hz");
}

#[test]
fn relative_error_metric_sane() {
    assert!(max_rel_diff(&[1.0, 2.0], &[1.0, 2.0]) < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_count_formula_holds(n in 320usize..60_000) {
        let cfg = FbankConfig::default();
        let wav = Waveform::new(vec![0.25f32; n], 16000).unwrap();
        let frames = frame_and_window(&wav, &cfg).unwrap();
        prop_assert_eq!(frames.len(), 1 + (n - 320) / 160);
    }
}
