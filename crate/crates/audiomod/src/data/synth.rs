//! Synthetic two-class corpus: band-limited noise bursts (class 0) versus
//! harmonic tone complexes (class 1). The classes are separable by
//! construction — a spectral-centroid threshold alone classifies them — so
//! desk-scale training runs have a meaningful signal to learn.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{split_manifest, Manifest, ManifestRecord, Split};
use crate::audio::write_wav_16bit;
use crate::error::{Error, Result};
use crate::util::splitmix;

const SAMPLE_RATE: u32 = 16_000;

/// RBJ-cookbook biquad band-pass section (constant 0 dB peak gain).
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl Biquad {
    fn bandpass(center_hz: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * center_hz / fs;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Biquad {
            b0: alpha / a0,
            b1: 0.0,
            b2: -alpha / a0,
            a1: -2.0 * w0.cos() / a0,
            a2: (1.0 - alpha) / a0,
            x1: 0.0,
            x2: 0.0,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.b1 * self.x1 + self.b2 * self.x2 - self.a1 * self.y1 - self.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn peak_normalize(samples: &mut [f64], peak: f64) {
    let max = samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if max > 0.0 {
        let k = peak / max;
        samples.iter_mut().for_each(|v| *v *= k);
    }
}

/// Class 0: white noise through a 2-6 kHz band-pass, gated into bursts.
fn noise_burst(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut f1 = Biquad::bandpass(3464.0, 0.9, f64::from(SAMPLE_RATE));
    let mut f2 = Biquad::bandpass(3464.0, 0.9, f64::from(SAMPLE_RATE));
    let mut out: Vec<f64> = (0..n)
        .map(|_| f2.process(f1.process(rng.gen_range(-1.0..1.0))))
        .collect();

    // gate 250 ms segments on/off with 10 ms ramps; at least one stays on
    let seg = (SAMPLE_RATE as usize) / 4;
    let ramp = (SAMPLE_RATE as usize) / 100;
    let n_segs = n.div_ceil(seg);
    let mut gates: Vec<bool> = (0..n_segs).map(|_| rng.gen_bool(0.7)).collect();
    if gates.iter().all(|&g| !g) {
        let idx = rng.gen_range(0..n_segs);
        gates[idx] = true;
    }
    for (s, &on) in gates.iter().enumerate() {
        let start = s * seg;
        let end = ((s + 1) * seg).min(n);
        for i in start..end {
            let mut g = if on { 1.0 } else { 0.0 };
            if on && i - start < ramp {
                g = (i - start) as f64 / ramp as f64;
            }
            if on && end - i <= ramp {
                g = g.min((end - i) as f64 / ramp as f64);
            }
            out[i] *= g;
        }
    }
    peak_normalize(&mut out, 0.6);
    out
}

/// Class 1: harmonic complex with randomized fundamental in [150, 400] Hz,
/// eight 1/k-weighted harmonics, and slow amplitude modulation.
fn harmonic_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let f0 = rng.gen_range(150.0..=400.0);
    let am_rate = rng.gen_range(0.5..2.0);
    let am_depth = 0.3;
    let fs = f64::from(SAMPLE_RATE);
    let harmonics: Vec<(f64, f64, f64)> = (1..=8)
        .map(|k| {
            let freq = f0 * k as f64;
            let phase = rng.gen_range(0.0..2.0 * PI);
            (freq, 1.0 / k as f64, phase)
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let am = 1.0 - am_depth + am_depth * (2.0 * PI * am_rate * t).sin();
        let v: f64 = harmonics
            .iter()
            .map(|&(f, a, ph)| a * (2.0 * PI * f * t + ph).sin())
            .sum();
        out.push(v * am);
    }
    peak_normalize(&mut out, 0.6);
    out
}

/// Generates `n_per_class` WAVs per class into `out_dir` plus
/// `manifest.jsonl`, with durations uniform in [2, 10] s at 16 kHz. Output
/// bytes are a pure function of the seed. Splits are assigned by the seeded
/// hash splitter at 70/10/20.
pub fn make_synthetic_dataset(n_per_class: usize, out_dir: &Path, seed: u64) -> Result<Manifest> {
    if n_per_class < 1 {
        return Err(Error::Config("data.n_per_class must be at least 1".into()));
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", out_dir.display()))))?;

    let mut records = Vec::with_capacity(2 * n_per_class);
    for class in 0..2u8 {
        for idx in 0..n_per_class {
            // one RNG stream per file so output is order-independent
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix(
                seed ^ splitmix(u64::from(class) << 32 | idx as u64),
            ));
            let duration = rng.gen_range(2.0..=10.0);
            let n = (duration * f64::from(SAMPLE_RATE)).round() as usize;
            let samples = match class {
                0 => noise_burst(&mut rng, n),
                _ => harmonic_complex(&mut rng, n),
            };
            let id = format!("{}_{idx:05}", if class == 0 { "noise" } else { "tone" });
            let path = out_dir.join(format!("{id}.wav"));
            let f32s: Vec<f32> = samples.iter().map(|&v| v as f32).collect();
            write_wav_16bit(&path, &f32s, SAMPLE_RATE)?;
            records.push(ManifestRecord {
                id,
                path,
                label: class,
                split: Split::Train,
                duration_s: n as f64 / f64::from(SAMPLE_RATE),
            });
        }
    }
    let manifest = split_manifest(records, (0.7, 0.1, 0.2), seed)?;
    manifest.save(&out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}
