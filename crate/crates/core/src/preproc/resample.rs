use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter;
use crate::error::{Error, Result};
use crate::model::Recording;

/// Lowest accepted output rate: twice the 50 Hz top of the gamma band.
pub const MIN_TARGET_FS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleOptions {
    /// Allow non-integer rate ratios (windowed-sinc interpolation).
    pub allow_rational: bool,
    /// Anti-alias low-pass order for integer decimation.
    pub antialias_order: usize,
    /// Anti-alias cutoff as a fraction of the output Nyquist frequency.
    pub cutoff_fraction: f64,
}

impl Default for ResampleOptions {
    fn default() -> Self {
        Self {
            allow_rational: false,
            antialias_order: 8,
            cutoff_fraction: 0.8,
        }
    }
}

/// Down-samples to `target_fs`, applying an anti-alias low-pass first.
///
/// Output length is `floor(samples * target_fs / fs)`.
pub fn resample(rec: Recording, target_fs: f64, opts: &ResampleOptions) -> Result<Recording> {
    let fs = rec.fs();
    if target_fs > fs {
        return Err(Error::invalid(format!(
            "upsampling from {fs} Hz to {target_fs} Hz is not supported"
        )));
    }
    if target_fs < MIN_TARGET_FS {
        return Err(Error::invalid(format!(
            "target rate {target_fs} Hz is below {MIN_TARGET_FS} Hz"
        )));
    }
    if target_fs == fs {
        return Ok(rec);
    }
    let ratio = fs / target_fs;
    let q = ratio.round();
    let integer = (ratio - q).abs() < 1e-9;
    let (channels, _, data, offset) = rec.into_parts();
    let n_out = (data.first().map_or(0, Vec::len) as f64 * target_fs / fs + 1e-9).floor() as usize;
    let out: Vec<Vec<f64>> = if integer {
        let q = q as usize;
        let cutoff = opts.cutoff_fraction * target_fs / 2.0;
        let sos = filter::butterworth(filter::Kind::Lowpass, opts.antialias_order, cutoff, fs);
        data.into_par_iter()
            .map(|row| {
                let y = filter::sosfiltfilt(&sos, &row);
                (0..n_out).map(|i| y[i * q]).collect()
            })
            .collect()
    } else if opts.allow_rational {
        data.par_iter()
            .map(|row| sinc_resample(row, fs, target_fs, n_out))
            .collect()
    } else {
        return Err(Error::invalid(format!(
            "{fs} Hz is not an integer multiple of {target_fs} Hz; enable rational resampling"
        )));
    };
    Recording::new(channels, target_fs, out, offset)
}

/// Blackman-windowed sinc interpolation with per-output weight normalization
/// (exact DC passthrough).
fn sinc_resample(x: &[f64], fs: f64, target_fs: f64, n_out: usize) -> Vec<f64> {
    // cutoff relative to the input rate, just under the output Nyquist
    let fc = 0.45 * target_fs / fs;
    let half_width = (16.0 / fc).ceil() as i64;
    let n = x.len() as i64;
    (0..n_out)
        .map(|m| {
            let t = m as f64 * fs / target_fs;
            let centre = t.floor() as i64;
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for k in (centre - half_width + 1).max(0)..=(centre + half_width).min(n - 1) {
                let u = t - k as f64;
                let arg = 2.0 * fc * u;
                let sinc = if arg.abs() < 1e-12 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
                let r = (u / half_width as f64 + 1.0) / 2.0;
                let win = 0.42 - 0.5 * (2.0 * PI * r).cos() + 0.08 * (4.0 * PI * r).cos();
                let w = sinc * win;
                acc += w * x[k as usize];
                wsum += w;
            }
            acc / wsum
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_rec(fs: f64, n: usize, f: f64) -> Recording {
        let row = (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();
        Recording::new(vec!["Oz".into()], fs, vec![row], 0.0).unwrap()
    }

    /// Frequency of the largest DFT bin, by direct summation.
    fn peak_freq(x: &[f64], fs: f64) -> f64 {
        let n = x.len();
        let mut best = (0.0, 0usize);
        for k in 1..n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in x.iter().enumerate() {
                let ph = -2.0 * PI * (k * i) as f64 / n as f64;
                re += v * ph.cos();
                im += v * ph.sin();
            }
            let p = re * re + im * im;
            if p > best.0 {
                best = (p, k);
            }
        }
        best.1 as f64 * fs / n as f64
    }

    #[test]
    fn length_arithmetic() {
        let r = Recording::new(vec!["A".into()], 1000.0, vec![vec![0.0; 60_000]], 0.0).unwrap();
        let out = resample(r, 250.0, &ResampleOptions::default()).unwrap();
        assert_eq!(out.n_samples(), 15_000);
        assert_eq!(out.fs(), 250.0);
    }

    #[test]
    fn dc_passthrough() {
        let r = Recording::new(vec!["A".into()], 1000.0, vec![vec![5.0; 8000]], 0.0).unwrap();
        let out = resample(r, 250.0, &ResampleOptions::default()).unwrap();
        assert!(out.channel(0)[50..1950].iter().all(|v| (v - 5.0).abs() < 1e-6));
    }

    #[test]
    fn sine_matches_direct_synthesis() {
        let out = resample(sine_rec(1000.0, 4000, 10.0), 250.0, &ResampleOptions::default()).unwrap();
        let direct = sine_rec(250.0, 1000, 10.0);
        let got = peak_freq(out.channel(0), 250.0);
        let want = peak_freq(direct.channel(0), 250.0);
        assert!((got - want).abs() <= 0.01 * want);
        let mid = &out.channel(0)[100..900];
        let err = mid
            .iter()
            .zip(&direct.channel(0)[100..900])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn rational_path_needs_opt_in() {
        let r = sine_rec(1000.0, 3000, 10.0);
        assert!(resample(r.clone(), 300.0, &ResampleOptions::default()).is_err());
        let opts = ResampleOptions {
            allow_rational: true,
            ..Default::default()
        };
        let out = resample(r, 300.0, &opts).unwrap();
        assert_eq!(out.n_samples(), 900);
        let direct = sine_rec(300.0, 900, 10.0);
        let err = out.channel(0)[60..840]
            .iter()
            .zip(&direct.channel(0)[60..840])
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn rejects_upsampling_and_low_targets() {
        let r = sine_rec(250.0, 100, 10.0);
        assert!(resample(r.clone(), 500.0, &ResampleOptions::default()).is_err());
        assert!(resample(r, 50.0, &ResampleOptions::default()).is_err());
    }
}
