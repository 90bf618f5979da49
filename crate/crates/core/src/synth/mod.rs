//! Synthetic recordings with known spectral and phase content, and whole
//! synthetic studies with planted effects.

mod study;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Recording;
use crate::stats::RngSpec;

pub use study::{
    gen_study, plan_study, write_study, EffectSpec, GroundTruth, LagTemplate, NapTemplate, PerformanceTemplate,
    RecallTemplate, StudyTemplate, SubjectTruth, TaskPerformance,
};

/// A sinusoid `amplitude · cos(2πft + phase)` on the listed channels (all when empty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub freq_hz: f64,
    pub amplitude_uv: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default)]
    pub channels: Vec<usize>,
}

/// Shared oscillation on channels `i` and `j`, with `j` lagging `i` by `lag_rad`.
///
/// Phases are redrawn at random every `segment_s`. With `bandwidth_hz > 0`
/// the carrier becomes a sum of sinusoids spaced `1 / segment_s` apart
/// across `carrier ± bandwidth/2`, all sharing the same lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairLag {
    pub i: usize,
    pub j: usize,
    pub lag_rad: f64,
    pub carrier_hz: f64,
    #[serde(default = "one")]
    pub amplitude_uv: f64,
    #[serde(default)]
    pub bandwidth_hz: f64,
}

/// Narrowband activity with independent random phases on every listed channel,
/// optionally confined to a time window `[start_s, end_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    /// Peak amplitude of the equivalent single sinusoid; power is `amplitude² / 2`.
    pub amplitude_uv: f64,
    pub channels: Vec<usize>,
    #[serde(default)]
    pub window_s: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    White,
    /// 1/f power spectrum scaled to the same overall standard deviation.
    Pink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub fs: f64,
    pub duration_s: f64,
    pub channels: Vec<String>,
    #[serde(default)]
    pub components: Vec<Component>,
    #[serde(default)]
    pub noise_sigma_uv: f64,
    #[serde(default)]
    pub noise: NoiseKind,
    #[serde(default)]
    pub pair_lags: Vec<PairLag>,
    #[serde(default)]
    pub oscillations: Vec<Oscillation>,
    /// Interval between random phase redraws of lagged and narrowband activity.
    #[serde(default = "three")]
    pub segment_s: f64,
    #[serde(default)]
    pub start_offset_s: f64,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn three() -> f64 {
    3.0
}

impl SynthSpec {
    pub fn new(fs: f64, duration_s: f64, channels: Vec<String>, seed: u64) -> Self {
        Self {
            fs,
            duration_s,
            channels,
            components: Vec::new(),
            noise_sigma_uv: 0.0,
            noise: NoiseKind::White,
            pair_lags: Vec::new(),
            oscillations: Vec::new(),
            segment_s: 3.0,
            start_offset_s: 0.0,
            seed,
        }
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.fs).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0) || !(self.duration_s > 0.0) {
            return Err(Error::invalid("sampling rate and duration must be positive"));
        }
        if self.channels.is_empty() {
            return Err(Error::invalid("no channels"));
        }
        if !(self.segment_s > 0.0) {
            return Err(Error::invalid("segment length must be positive"));
        }
        if !(self.noise_sigma_uv >= 0.0) {
            return Err(Error::invalid("noise sigma must be non-negative"));
        }
        let nyq = self.fs / 2.0;
        let n_ch = self.channels.len();
        let check_ch = |c: usize| {
            if c >= n_ch {
                Err(Error::invalid(format!("channel index {c} out of range ({n_ch} channels)")))
            } else {
                Ok(())
            }
        };
        let check_freq = |f: f64, what: &str| {
            if !(f >= 0.0) || f >= nyq {
                Err(Error::invalid(format!(
                    "aliased {what}: {f} Hz is not below Nyquist ({nyq} Hz)"
                )))
            } else {
                Ok(())
            }
        };
        for c in &self.components {
            check_freq(c.freq_hz, "component")?;
            if !(c.amplitude_uv >= 0.0) {
                return Err(Error::invalid("component amplitude must be non-negative"));
            }
            c.channels.iter().try_for_each(|&ch| check_ch(ch))?;
        }
        for p in &self.pair_lags {
            check_ch(p.i)?;
            check_ch(p.j)?;
            if p.i == p.j {
                return Err(Error::invalid("pair lag needs two distinct channels"));
            }
            if !(p.amplitude_uv >= 0.0) || !(p.bandwidth_hz >= 0.0) {
                return Err(Error::invalid("pair lag amplitude and bandwidth must be non-negative"));
            }
            check_freq(p.carrier_hz - p.bandwidth_hz / 2.0, "pair-lag carrier")?;
            check_freq(p.carrier_hz + p.bandwidth_hz / 2.0, "pair-lag carrier")?;
        }
        for o in &self.oscillations {
            o.channels.iter().try_for_each(|&ch| check_ch(ch))?;
            if !(o.amplitude_uv >= 0.0) || !(o.bandwidth_hz >= 0.0) {
                return Err(Error::invalid("oscillation amplitude and bandwidth must be non-negative"));
            }
            check_freq(o.center_hz - o.bandwidth_hz / 2.0, "oscillation")?;
            check_freq(o.center_hz + o.bandwidth_hz / 2.0, "oscillation")?;
        }
        Ok(())
    }
}

/// Frequencies of a narrowband carrier: spacing `1 / segment_s` across the band.
fn carrier_grid(center: f64, bandwidth: f64, segment_s: f64) -> Vec<f64> {
    if bandwidth <= 0.0 {
        return vec![center];
    }
    let step = 1.0 / segment_s;
    let k = (bandwidth / step).floor() as usize;
    let lo = center - k as f64 * step / 2.0;
    (0..=k).map(|i| lo + i as f64 * step).collect()
}

/// Adds `Σ a·cos(2πf(t − t_seg) + φ_seg + offset)` over segments, drawing
/// one phase per (segment, frequency) from `rng`.
fn add_narrowband<R: Rng>(
    out: &mut [f64],
    fs: f64,
    freqs: &[f64],
    amplitude: f64,
    offset: f64,
    segment_len: usize,
    range: std::ops::Range<usize>,
    rng: &mut R,
) {
    let a = amplitude / (freqs.len() as f64).sqrt();
    let n_seg = out.len().div_ceil(segment_len);
    for s in 0..n_seg {
        let start = s * segment_len;
        let end = (start + segment_len).min(out.len());
        for &f in freqs {
            let phi: f64 = rng.gen::<f64>() * 2.0 * PI;
            let lo = start.max(range.start);
            let hi = end.min(range.end);
            if lo >= hi {
                continue;
            }
            let rot = Complex64::from_polar(1.0, 2.0 * PI * f / fs);
            let mut z = Complex64::from_polar(a, phi + offset + 2.0 * PI * f * (lo - start) as f64 / fs);
            for v in &mut out[lo..hi] {
                *v += z.re;
                z *= rot;
            }
        }
    }
}

fn pink(white: Vec<f64>, fs: f64, sigma: f64) -> Vec<f64> {
    let n = white.len();
    let mut buf: Vec<Complex64> = white.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    for k in 1..n {
        let f = k.min(n - k) as f64 * fs / n as f64;
        buf[k] /= f.sqrt();
    }
    let inverse = planner.plan_fft_inverse(n);
    inverse.process(&mut buf);
    let mut out: Vec<f64> = buf.into_iter().map(|c| c.re).collect();
    let m = out.iter().sum::<f64>() / n as f64;
    let sd = (out.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
    if sd > 0.0 {
        out.iter_mut().for_each(|v| *v = (*v - m) * sigma / sd);
    }
    out
}

/// One channel of [`gen_recording`]. Each channel draws from its own random
/// streams, so channels can be generated independently and in any order.
pub fn gen_channel(spec: &SynthSpec, ch: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    if ch >= spec.channels.len() {
        return Err(Error::invalid(format!("channel index {ch} out of range")));
    }
    let n = spec.n_samples();
    let fs = spec.fs;
    let streams = RngSpec::new(spec.seed);
    let segment_len = ((spec.segment_s * fs).round() as usize).max(1);

    let mut out = if spec.noise_sigma_uv > 0.0 {
        let mut rng = streams.stream(&format!("noise/{ch}"));
        let white: Vec<f64> = (0..n)
            .map(|_| spec.noise_sigma_uv * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        match spec.noise {
            NoiseKind::White => white,
            NoiseKind::Pink => pink(white, fs, spec.noise_sigma_uv),
        }
    } else {
        vec![0.0; n]
    };

    for c in spec.components.iter().filter(|c| c.channels.is_empty() || c.channels.contains(&ch)) {
        let w = 2.0 * PI * c.freq_hz / fs;
        for (t, v) in out.iter_mut().enumerate() {
            *v += c.amplitude_uv * (w * t as f64 + c.phase_rad).cos();
        }
    }

    for (k, p) in spec.pair_lags.iter().enumerate() {
        let offset = if ch == p.i {
            0.0
        } else if ch == p.j {
            -p.lag_rad
        } else {
            continue;
        };
        let freqs = carrier_grid(p.carrier_hz, p.bandwidth_hz, spec.segment_s);
        let mut rng = streams.stream(&format!("lag/{k}"));
        add_narrowband(&mut out, fs, &freqs, p.amplitude_uv, offset, segment_len, 0..n, &mut rng);
    }

    for (k, o) in spec.oscillations.iter().enumerate() {
        if !o.channels.contains(&ch) {
            continue;
        }
        let range = match o.window_s {
            Some((a, b)) => ((a * fs).round().max(0.0) as usize).min(n)..((b * fs).round().max(0.0) as usize).min(n),
            None => 0..n,
        };
        let freqs = carrier_grid(o.center_hz, o.bandwidth_hz, spec.segment_s);
        let mut rng = streams.stream(&format!("osc/{k}/{ch}"));
        add_narrowband(&mut out, fs, &freqs, o.amplitude_uv, 0.0, segment_len, range, &mut rng);
    }
    Ok(out)
}

/// Sum of sinusoids, lagged and narrowband carriers and Gaussian noise per
/// channel. Deterministic for a given seed.
pub fn gen_recording(spec: &SynthSpec) -> Result<Recording> {
    spec.validate()?;
    let spec = Arc::new(spec.clone());
    let data = (0..spec.channels.len())
        .into_par_iter()
        .map(|ch| gen_channel(&spec, ch))
        .collect::<Result<Vec<_>>>()?;
    Recording::new(spec.channels.clone(), spec.fs, data, spec.start_offset_s)
}

/// Rounds every sample to a multiple of `quantum` µV.
pub fn quantize(rec: Recording, quantum: f64) -> Result<Recording> {
    let (channels, fs, mut data, offset) = rec.into_parts();
    for row in &mut data {
        for v in row.iter_mut() {
            *v = (*v / quantum).round() * quantum;
        }
    }
    Recording::new(channels, fs, data, offset)
}

const ACTICAP_64: [&str; 64] = [
    "Fp1", "Fz", "F3", "F7", "FT9", "FC5", "FC1", "C3", "T7", "TP9", "CP5", "CP1", "Pz", "P3", "P7", "O1", "Oz",
    "O2", "P4", "P8", "TP10", "CP6", "CP2", "Cz", "C4", "T8", "FT10", "FC6", "FC2", "F4", "F8", "Fp2", "AF7", "AF3",
    "AFz", "F1", "F5", "FT7", "FC3", "FCz", "C1", "C5", "TP7", "CP3", "P1", "P5", "PO7", "PO3", "POz", "PO4", "PO8",
    "P6", "P2", "CPz", "CP4", "TP8", "C6", "C2", "FC4", "FT8", "F6", "F2", "AF4", "AF8",
];

/// 60-channel layout: the 64-channel actiCAP set without FT9, FT10, TP9 and TP10.
pub fn montage_60() -> Vec<String> {
    ACTICAP_64
        .iter()
        .filter(|l| !matches!(**l, "FT9" | "FT10" | "TP9" | "TP10"))
        .map(|l| l.to_string())
        .collect()
}

/// Classic 19-channel 10-20 layout.
pub fn montage_19() -> Vec<String> {
    [
        "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T7", "C3", "Cz", "C4", "T8", "P7", "P3", "Pz", "P4", "P8", "O1",
        "O2",
    ]
    .iter()
    .map(|l| l.to_string())
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Montage {
    #[serde(rename = "10-20")]
    #[default]
    TenTwenty,
    #[serde(rename = "60")]
    Sixty,
}

impl Montage {
    pub fn channels(self) -> Vec<String> {
        match self {
            Montage::TenTwenty => montage_19(),
            Montage::Sixty => montage_60(),
        }
    }
}
