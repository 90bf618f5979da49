//! Tapered periodograms, band power in dB and regional aggregation.
//!
//! The periodogram is a one-sided power spectral density in µV²/Hz,
//! normalized by the sampling rate and the taper's power so that
//! `Σ power · Δf` equals the taper-weighted mean square
//! `Σ (x·w)² / Σ w²` of the epoch. Band power integrates the one-sided
//! density over the half-open bin range `f1 <= f < f2` (rectangle rule), so
//! the factor of two of a two-sided integral is already folded into the
//! density.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BandRegionTable, BandSpec, Epoch, EpochSet, Metric, Region, RegionMap};

/// Returned by [`band_power_db`] when the linear band power is not positive.
pub const DB_FLOOR: f64 = -120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    #[default]
    Hann,
    Rectangular,
}

impl Taper {
    /// Periodic (DFT-even) window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Taper::Rectangular => vec![1.0; n],
            Taper::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Order in which epochs, dB conversion and channel means are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// dB per epoch and channel, then mean over epochs, then over channels.
    #[default]
    DbThenMean,
    /// Mean linear power over epochs, dB per channel, then mean over channels.
    LinearThenDb,
}

/// Tapered FFT of fixed length, reusable across epochs.
#[derive(Clone)]
pub struct SpectrumPlan {
    n: usize,
    fs: f64,
    window: Vec<f64>,
    window_power: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectrumPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumPlan")
            .field("n", &self.n)
            .field("fs", &self.fs)
            .finish()
    }
}

impl SpectrumPlan {
    pub fn new(n: usize, fs: f64, taper: Taper) -> Result<Self> {
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "periodogram needs at least 2 samples, got {n}"
            )));
        }
        let window = taper.coefficients(n);
        let window_power = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(n);
        Ok(Self {
            n,
            fs,
            window,
            window_power,
            fft,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of one-sided bins, `0 ..= n/2`.
    pub fn n_bins(&self) -> usize {
        self.n / 2 + 1
    }

    pub fn resolution(&self) -> f64 {
        self.fs / self.n as f64
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|k| k as f64 * self.resolution()).collect()
    }

    /// Raw tapered DFT coefficients for bins `0..n_bins`.
    pub fn transform(&self, x: &[f64], n_bins: usize, scratch: &mut Vec<Complex64>) -> Vec<Complex64> {
        debug_assert_eq!(x.len(), self.n);
        scratch.clear();
        scratch.extend(x.iter().zip(&self.window).map(|(v, w)| Complex64::new(v * w, 0.0)));
        self.fft.process(scratch);
        scratch[..n_bins.min(self.n_bins())].to_vec()
    }

    /// One-sided density of one channel.
    pub fn density(&self, x: &[f64], scratch: &mut Vec<Complex64>) -> Vec<f64> {
        let coeffs = self.transform(x, self.n_bins(), scratch);
        let scale = 1.0 / (self.fs * self.window_power);
        let nyquist = if self.n % 2 == 0 { Some(self.n / 2) } else { None };
        coeffs
            .iter()
            .enumerate()
            .map(|(k, z)| {
                let p = z.norm_sqr() * scale;
                if k == 0 || Some(k) == nyquist {
                    p
                } else {
                    2.0 * p
                }
            })
            .collect()
    }
}

/// One-sided power spectral density per channel (µV²/Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    pub freqs: Vec<f64>,
    pub power: Vec<Vec<f64>>,
}

impl Periodogram {
    pub fn resolution(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }

    /// `Σ power · Δf` per channel.
    pub fn integral(&self) -> Vec<f64> {
        let df = self.resolution();
        self.power.iter().map(|p| p.iter().sum::<f64>() * df).collect()
    }
}

pub fn periodogram(epoch: &Epoch, fs: f64, taper: Taper) -> Result<Periodogram> {
    if epoch.rejected {
        return Err(Error::RejectedEpoch);
    }
    let plan = SpectrumPlan::new(epoch.n_samples(), fs, taper)?;
    Ok(periodogram_with(&plan, epoch))
}

fn periodogram_with(plan: &SpectrumPlan, epoch: &Epoch) -> Periodogram {
    let mut scratch = Vec::with_capacity(plan.len());
    Periodogram {
        freqs: plan.freqs(),
        power: epoch.data.iter().map(|x| plan.density(x, &mut scratch)).collect(),
    }
}

/// Band power per channel in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPower {
    pub db: Vec<f64>,
    pub linear: Vec<f64>,
    /// Channels whose linear power was not positive and were set to [`DB_FLOOR`].
    pub floored: Vec<bool>,
}

/// Indices of bins with `f1 <= f < f2`.
pub fn band_bins(freqs: &[f64], band: &BandSpec) -> Result<std::ops::Range<usize>> {
    let lo = freqs.iter().position(|&f| f >= band.f1 - 1e-9);
    let hi = freqs.iter().position(|&f| f >= band.f2 - 1e-9).unwrap_or(freqs.len());
    match lo {
        Some(lo) if lo < hi => Ok(lo..hi),
        _ => Err(Error::EmptyBand {
            band: band.name.to_string(),
            resolution_hz: freqs.get(1).copied().unwrap_or(0.0),
        }),
    }
}

pub fn to_db(linear: f64) -> (f64, bool) {
    if linear > 0.0 {
        (10.0 * linear.log10(), false)
    } else {
        (DB_FLOOR, true)
    }
}

pub fn band_power_db(pg: &Periodogram, band: &BandSpec) -> Result<BandPower> {
    if let Some(&top) = pg.freqs.last() {
        if band.f2 > top + pg.resolution() {
            return Err(Error::invalid(format!(
                "band {} ({}..{} Hz) exceeds Nyquist {top} Hz",
                band.name, band.f1, band.f2
            )));
        }
    }
    let bins = band_bins(&pg.freqs, band)?;
    let df = pg.resolution();
    let linear: Vec<f64> = pg.power.iter().map(|p| p[bins.clone()].iter().sum::<f64>() * df).collect();
    let (db, floored) = linear.iter().map(|&l| to_db(l)).unzip();
    Ok(BandPower { db, linear, floored })
}

/// Per-channel band power averaged over the accepted epochs of a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelBandPower {
    pub channels: Vec<String>,
    pub bands: Vec<BandSpec>,
    /// `db[band][channel]`; `None` when the band has no bin at this resolution.
    pub db: Vec<Vec<Option<f64>>>,
    pub n_epochs: usize,
    pub resolution_hz: f64,
    /// Count of (epoch, channel, band) values that hit the dB floor.
    pub n_floored: usize,
}

pub fn channel_band_power(
    epochs: &EpochSet,
    bands: &[BandSpec],
    taper: Taper,
    averaging: Averaging,
) -> Result<ChannelBandPower> {
    let accepted: Vec<&Epoch> = epochs.accepted().collect();
    if accepted.is_empty() {
        return Err(Error::InsufficientData("no accepted epochs".into()));
    }
    let n = accepted[0].n_samples();
    if accepted.iter().any(|e| e.n_samples() != n) {
        return Err(Error::invalid("epochs differ in length"));
    }
    let plan = SpectrumPlan::new(n, epochs.fs, taper)?;
    let freqs = plan.freqs();
    let nyq = epochs.fs / 2.0;
    let band_ranges: Vec<Option<std::ops::Range<usize>>> = bands
        .iter()
        .map(|b| {
            if b.f2 > nyq + plan.resolution() {
                return Err(Error::invalid(format!("band {} exceeds Nyquist", b.name)));
            }
            Ok(band_bins(&freqs, b).ok())
        })
        .collect::<Result<_>>()?;
    let n_ch = epochs.channels.len();
    let df = plan.resolution();

    // per epoch: [band][channel] linear power
    let per_epoch: Vec<Vec<Vec<f64>>> = accepted
        .par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |scratch, e| {
                let dens: Vec<Vec<f64>> = e.data.iter().map(|x| plan.density(x, scratch)).collect();
                band_ranges
                    .iter()
                    .map(|r| match r {
                        Some(r) => dens.iter().map(|d| d[r.clone()].iter().sum::<f64>() * df).collect(),
                        None => Vec::new(),
                    })
                    .collect()
            },
        )
        .collect();

    let mut n_floored = 0;
    let mut db = Vec::with_capacity(bands.len());
    for (b, range) in band_ranges.iter().enumerate() {
        if range.is_none() {
            db.push(vec![None; n_ch]);
            continue;
        }
        let mut acc = vec![0.0; n_ch];
        for ep in &per_epoch {
            for (c, &lin) in ep[b].iter().enumerate() {
                match averaging {
                    Averaging::DbThenMean => {
                        let (v, fl) = to_db(lin);
                        n_floored += fl as usize;
                        acc[c] += v;
                    }
                    Averaging::LinearThenDb => acc[c] += lin,
                }
            }
        }
        let k = per_epoch.len() as f64;
        db.push(
            acc.into_iter()
                .map(|s| match averaging {
                    Averaging::DbThenMean => Some(s / k),
                    Averaging::LinearThenDb => {
                        let (v, fl) = to_db(s / k);
                        n_floored += fl as usize;
                        Some(v)
                    }
                })
                .collect(),
        );
    }
    Ok(ChannelBandPower {
        channels: epochs.channels.clone(),
        bands: bands.to_vec(),
        db,
        n_epochs: accepted.len(),
        resolution_hz: plan.resolution(),
        n_floored,
    })
}

/// Means channel values within each region: a 6 × 5 dB table.
pub fn aggregate_regions(cbp: &ChannelBandPower, map: &RegionMap) -> Result<BandRegionTable> {
    let regions = map.regions_for(&cbp.channels);
    for r in Region::ALL {
        if !regions.contains(&Some(r)) {
            return Err(Error::invalid(format!("region {} has no mapped channels", r.as_str())));
        }
    }
    let mut table = BandRegionTable::new(Metric::PsdDb, cbp.bands.clone());
    table.resolution_hz = Some(cbp.resolution_hz);
    for (b, row) in cbp.db.iter().enumerate() {
        for r in Region::ALL {
            let vals: Vec<f64> = row
                .iter()
                .zip(&regions)
                .filter(|(_, reg)| **reg == Some(r))
                .filter_map(|(v, _)| *v)
                .collect();
            if vals.is_empty() {
                continue;
            }
            table.values[b][r.index()] = Some(vals.iter().sum::<f64>() / vals.len() as f64);
            table.n_epochs_used[b][r.index()] = cbp.n_epochs;
        }
    }
    Ok(table)
}

/// Band × region PSD (dB) over the accepted epochs of a set.
pub fn region_psd(epochs: &EpochSet, bands: &[BandSpec], map: &RegionMap) -> Result<BandRegionTable> {
    region_psd_with(epochs, bands, map, Taper::Hann, Averaging::DbThenMean)
}

pub fn region_psd_with(
    epochs: &EpochSet,
    bands: &[BandSpec],
    map: &RegionMap,
    taper: Taper,
    averaging: Averaging,
) -> Result<BandRegionTable> {
    let cbp = channel_band_power(epochs, bands, taper, averaging)?;
    aggregate_regions(&cbp, map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_bands, BandName, Condition, Session};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn epoch(data: Vec<Vec<f64>>) -> Epoch {
        Epoch {
            data,
            condition: Condition::Nap,
            session: Session::Nap,
            rejected: false,
            index: 0,
            onset_s: 0.0,
        }
    }

    fn sine(n: usize, fs: f64, f: f64, amp: f64, phase: f64) -> Vec<f64> {
        (0..n).map(|i| amp * (2.0 * PI * f * i as f64 / fs + phase).sin()).collect()
    }

    fn band(name: BandName) -> BandSpec {
        default_bands().into_iter().find(|b| b.name == name).unwrap()
    }

    /// Time-domain side of Parseval with the same taper.
    fn weighted_mean_square(x: &[f64], taper: Taper) -> f64 {
        let w = taper.coefficients(x.len());
        let num: f64 = x.iter().zip(&w).map(|(v, w)| (v * w).powi(2)).sum();
        num / w.iter().map(|w| w * w).sum::<f64>()
    }

    #[test]
    fn zero_signal_zero_power_and_floor() {
        let pg = periodogram(&epoch(vec![vec![0.0; 750]]), 250.0, Taper::Hann).unwrap();
        assert!(pg.power[0].iter().all(|&p| p == 0.0));
        let bp = band_power_db(&pg, &band(BandName::Alpha)).unwrap();
        assert_eq!(bp.db[0], DB_FLOOR);
        assert!(bp.floored[0]);
    }

    #[test]
    fn unit_sine_parseval_and_alpha_power() {
        let pg = periodogram(&epoch(vec![sine(750, 250.0, 10.0, 1.0, 0.3)]), 250.0, Taper::Hann).unwrap();
        assert_eq!(pg.freqs.len(), 376);
        assert!((pg.resolution() - 1.0 / 3.0).abs() < 1e-12);
        let total = pg.integral()[0];
        assert!((total - 0.5).abs() < 0.005, "{total}");
        let alpha = band_power_db(&pg, &band(BandName::Alpha)).unwrap().db[0];
        assert!((alpha - 10.0 * 0.5f64.log10()).abs() < 0.2, "{alpha}");
        let delta = band_power_db(&pg, &band(BandName::Delta)).unwrap().db[0];
        assert!(delta <= -40.0, "{delta}");
    }

    #[test]
    fn parseval_random_epochs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 7.0).unwrap();
        for n in [2, 3, 50, 100, 749, 750] {
            for taper in [Taper::Hann, Taper::Rectangular] {
                let x: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
                if taper == Taper::Hann && n == 2 {
                    continue; // periodic Hann of length 2 is [0, 1]
                }
                let pg = periodogram(&epoch(vec![x.clone()]), 250.0, taper).unwrap();
                let want = weighted_mean_square(&x, taper);
                assert!((pg.integral()[0] - want).abs() <= 1e-9 * want.max(1.0), "n={n}");
            }
        }
    }

    #[test]
    fn white_noise_density_is_flat() {
        let fs = 250.0;
        let sigma = 2.0;
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let plan = SpectrumPlan::new(750, fs, Taper::Hann).unwrap();
        let mut scratch = Vec::new();
        let mut acc = vec![0.0; plan.n_bins()];
        for _ in 0..1000 {
            let x: Vec<f64> = (0..750).map(|_| normal.sample(&mut rng)).collect();
            for (a, p) in acc.iter_mut().zip(plan.density(&x, &mut scratch)) {
                *a += p / 1000.0;
            }
        }
        let expect = sigma * sigma / (fs / 2.0);
        // interior bins: average across bins too, then each bin within MC tolerance
        let interior = &acc[5..370];
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        assert!((mean - expect).abs() < 0.01 * expect, "{mean} vs {expect}");
        assert!(interior.iter().all(|&p| (p - expect).abs() < 0.15 * expect));
    }

    #[test]
    fn rejected_or_short_epochs_error() {
        let mut e = epoch(vec![vec![1.0; 10]]);
        e.rejected = true;
        assert!(matches!(periodogram(&e, 100.0, Taper::Hann), Err(Error::RejectedEpoch)));
        assert!(periodogram(&epoch(vec![vec![1.0]]), 100.0, Taper::Hann).is_err());
    }

    #[test]
    fn empty_band_errors() {
        let pg = periodogram(&epoch(vec![vec![1.0; 50]]), 250.0, Taper::Hann).unwrap();
        assert!(matches!(band_power_db(&pg, &band(BandName::Delta)), Err(Error::EmptyBand { .. })));
    }

    #[test]
    fn scale_by_ten_adds_twenty_db() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 3.0).unwrap();
        let x: Vec<f64> = (0..750).map(|_| normal.sample(&mut rng)).collect();
        let x10: Vec<f64> = x.iter().map(|v| v * 10.0).collect();
        let a = periodogram(&epoch(vec![x]), 250.0, Taper::Hann).unwrap();
        let b = periodogram(&epoch(vec![x10]), 250.0, Taper::Hann).unwrap();
        for bd in default_bands() {
            let da = band_power_db(&a, &bd).unwrap().db[0];
            let db = band_power_db(&b, &bd).unwrap().db[0];
            assert!((db - da - 20.0).abs() < 1e-9);
        }
    }

    fn labels() -> Vec<String> {
        ["Fz", "F3", "Cz", "T7", "Pz", "Oz"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_channels_give_equal_regions() {
        let chans = labels();
        let map = crate::model::default_region_map(&chans);
        let x = sine(750, 250.0, 9.0, 3.0, 0.0);
        let set = EpochSet {
            channels: chans.clone(),
            fs: 250.0,
            epochs: (0..4).map(|_| epoch(vec![x.clone(); chans.len()])).collect(),
        };
        let t = region_psd(&set, &default_bands(), &map).unwrap();
        for row in &t.values {
            assert!(row.iter().all(|v| v == &row[0]));
        }
        assert!(t.n_epochs_used.iter().flatten().all(|&n| n == 4));
    }

    #[test]
    fn regional_mean_is_arithmetic_in_db() {
        let bands = default_bands();
        let chans = labels();
        let cbp = ChannelBandPower {
            channels: chans.clone(),
            bands: bands.clone(),
            db: bands
                .iter()
                .map(|_| vec![Some(-3.0), Some(-5.0), Some(-4.0), Some(-4.0), Some(-4.0), Some(-4.0)])
                .collect(),
            n_epochs: 1,
            resolution_hz: 1.0 / 3.0,
            n_floored: 0,
        };
        let t = aggregate_regions(&cbp, &crate::model::default_region_map(&chans)).unwrap();
        assert_eq!(t.region_value(2, Region::Frontal), Some(-4.0));
    }

    #[test]
    fn missing_region_errors() {
        let chans: Vec<String> = vec!["Fz".into(), "Cz".into()];
        let set = EpochSet {
            channels: chans.clone(),
            fs: 250.0,
            epochs: vec![epoch(vec![vec![1.0; 750]; 2])],
        };
        assert!(region_psd(&set, &default_bands(), &crate::model::default_region_map(&chans)).is_err());
    }

    #[test]
    fn rejected_epochs_skipped() {
        let chans = labels();
        let map = crate::model::default_region_map(&chans);
        let quiet = epoch(vec![sine(750, 250.0, 10.0, 1.0, 0.0); 6]);
        let mut loud = epoch(vec![sine(750, 250.0, 10.0, 50.0, 0.0); 6]);
        loud.rejected = true;
        let set = EpochSet {
            channels: chans,
            fs: 250.0,
            epochs: vec![quiet.clone(), loud],
        };
        let only = EpochSet {
            epochs: vec![quiet],
            ..set.clone()
        };
        assert_eq!(
            region_psd(&set, &default_bands(), &map).unwrap().values,
            region_psd(&only, &default_bands(), &map).unwrap().values
        );
    }

    #[test]
    fn short_epochs_leave_unresolvable_bands_missing() {
        let chans = labels();
        let set = EpochSet {
            channels: chans.clone(),
            fs: 250.0,
            epochs: vec![epoch(vec![sine(50, 250.0, 10.0, 1.0, 0.0); 6]); 3],
        };
        let t = region_psd(&set, &default_bands(), &crate::model::default_region_map(&chans)).unwrap();
        assert!(t.values[0].iter().all(Option::is_none));
        assert!(t.n_epochs_used[0].iter().all(|&n| n == 0));
        assert!(t.values[2].iter().all(Option::is_some));
        assert_eq!(t.resolution_hz, Some(5.0));
    }

    #[test]
    fn linear_averaging_option() {
        let chans = labels();
        let map = crate::model::default_region_map(&chans);
        let a = epoch(vec![sine(750, 250.0, 10.0, 1.0, 0.0); 6]);
        let b = epoch(vec![sine(750, 250.0, 10.0, 10.0, 0.0); 6]);
        let set = EpochSet {
            channels: chans,
            fs: 250.0,
            epochs: vec![a, b],
        };
        let alpha = 2;
        let db_mean = region_psd_with(&set, &default_bands(), &map, Taper::Hann, Averaging::DbThenMean)
            .unwrap()
            .values[alpha][0]
            .unwrap();
        let lin = region_psd_with(&set, &default_bands(), &map, Taper::Hann, Averaging::LinearThenDb)
            .unwrap()
            .values[alpha][0]
            .unwrap();
        // dB: mean of 10log10(0.5) and 10log10(50); linear: 10log10(25.25)
        assert!((db_mean - 10.0 * 5.0f64.log10()).abs() < 0.01);
        assert!((lin - 10.0 * 25.25f64.log10()).abs() < 0.01);
    }
}
