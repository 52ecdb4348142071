//! Band-limited sample-rate conversion with a Hann-windowed sinc kernel.

use super::Waveform;

/// Zero crossings of the sinc kernel on each side of center.
const TAPS: usize = 32;

/// Resamples to `target_hz`, preserving duration within one output sample.
/// Identity when the rate already matches.
pub fn resample(w: &Waveform, target_hz: u32) -> Waveform {
    assert!(target_hz > 0, "target sample rate must be positive");
    if w.sample_rate_hz() == target_hz {
        return w.clone();
    }
    let src = w.samples();
    let n = src.len();
    let ratio = f64::from(target_hz) / f64::from(w.sample_rate_hz());
    let out_len = ((n as f64) * ratio).round().max(1.0) as usize;

    // Cutoff in cycles per source sample: Nyquist of the narrower rate.
    let fc = 0.5 * ratio.min(1.0);
    // Window half-width in source samples, holding TAPS sinc zero crossings.
    let half = TAPS as f64 / (2.0 * fc);
    let half_i = half.ceil() as isize;

    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let s = i as f64 / ratio; // position in source samples
        let center = s.floor() as isize;
        let mut acc = 0.0f64;
        for j in (center - half_i)..=(center + half_i) {
            if j < 0 || j >= n as isize {
                continue;
            }
            let t = s - j as f64;
            let x = 2.0 * fc * t;
            let sinc = if x.abs() < 1e-12 {
                1.0
            } else {
                (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
            };
            let win = 0.5 * (1.0 + (std::f64::consts::PI * t / half).cos());
            acc += f64::from(src[j as usize]) * 2.0 * fc * sinc * win;
        }
        out.push(acc as f32);
    }
    Waveform::new(out, target_hz).expect("resampled waveform is valid")
}
