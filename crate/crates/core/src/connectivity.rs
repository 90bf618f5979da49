//! Weighted phase lag index between channel pairs.
//!
//! For each frequency bin the expectation is taken across epochs:
//! `wPLI = |E{Im X}| / E{|Im X|}` with `X = Zᵢ·conj(Zⱼ)`. A bin where
//! `E{|Im X|} = 0` contributes 0. The band value is the mean of the bin-wise
//! indices over `f1 <= f < f2`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BandRegionTable, BandSpec, EpochSet, Metric, Region, RegionMap, RegionPair};
use crate::spectral::{band_bins, SpectrumPlan, Taper};

/// Tapered Fourier coefficients of every accepted epoch and channel.
///
/// Cross-spectral values `X(i, j) = Zᵢ·conj(Zⱼ)` are formed on demand rather
/// than stored for every pair.
#[derive(Debug, Clone)]
pub struct CrossSpectrum {
    pub channels: Vec<String>,
    pub freqs: Vec<f64>,
    n_epochs: usize,
    /// `coeffs[channel][epoch * n_bins + bin]`
    coeffs: Vec<Vec<Complex64>>,
}

impl CrossSpectrum {
    pub fn n_epochs(&self) -> usize {
        self.n_epochs
    }

    pub fn n_bins(&self) -> usize {
        self.freqs.len()
    }

    pub fn resolution(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }

    pub fn coefficient(&self, channel: usize, epoch: usize, bin: usize) -> Complex64 {
        self.coeffs[channel][epoch * self.n_bins() + bin]
    }

    pub fn get(&self, i: usize, j: usize, epoch: usize, bin: usize) -> Complex64 {
        self.coefficient(i, epoch, bin) * self.coefficient(j, epoch, bin).conj()
    }
}

/// Cross-spectrum over all one-sided bins.
pub fn cross_spectrum(epochs: &EpochSet, taper: Taper) -> Result<CrossSpectrum> {
    cross_spectrum_upto(epochs, taper, None)
}

/// Cross-spectrum keeping only bins below `max_hz` (all bins when `None`).
pub fn cross_spectrum_upto(
    epochs: &EpochSet,
    taper: Taper,
    max_hz: Option<f64>,
) -> Result<CrossSpectrum> {
    let accepted: Vec<_> = epochs.accepted().collect();
    if accepted.is_empty() {
        return Err(Error::InsufficientData("cross-spectrum needs at least one accepted epoch".into()));
    }
    let n = accepted[0].n_samples();
    if accepted.iter().any(|e| e.n_samples() != n) {
        return Err(Error::invalid("epochs differ in length"));
    }
    let plan = SpectrumPlan::new(n, epochs.fs, taper)?;
    let all = plan.freqs();
    let n_bins = match max_hz {
        Some(f) => all.iter().take_while(|&&x| x < f + 1e-9).count().max(1),
        None => all.len(),
    };
    let freqs = all[..n_bins].to_vec();
    let n_ch = epochs.channels.len();
    let coeffs: Vec<Vec<Complex64>> = (0..n_ch)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |scratch, c| {
                let mut row = Vec::with_capacity(accepted.len() * n_bins);
                for e in &accepted {
                    row.extend(plan.transform(&e.data[c], n_bins, scratch));
                }
                row
            },
        )
        .collect();
    Ok(CrossSpectrum {
        channels: epochs.channels.clone(),
        freqs,
        n_epochs: accepted.len(),
        coeffs,
    })
}

/// Symmetric channel × channel wPLI for one band; the diagonal is masked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WpliMatrix {
    pub band: BandSpec,
    pub channels: Vec<String>,
    pub n_epochs: usize,
    pub resolution_hz: f64,
    values: Vec<f64>,
}

impl WpliMatrix {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        (i != j).then(|| self.values[i * self.n_channels() + j])
    }

    pub fn from_values(band: BandSpec, channels: Vec<String>, n_epochs: usize, values: Vec<f64>) -> Result<Self> {
        let n = channels.len();
        if values.len() != n * n {
            return Err(Error::invalid("wPLI matrix must be channels × channels"));
        }
        Ok(Self {
            band,
            channels,
            n_epochs,
            resolution_hz: 0.0,
            values,
        })
    }

    /// Upper-triangle entries `(i, j, value)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n_channels();
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j, self.values[i * n + j])))
    }
}

/// Bins whose summed |Im| falls below this fraction of the band's largest
/// bin are numerically empty.
const EMPTY_BIN: f64 = 1e-9;

/// wPLI for a single band.
pub fn wpli(cs: &CrossSpectrum, band: &BandSpec) -> Result<WpliMatrix> {
    band_bins(&cs.freqs, band)?;
    let mut out = wpli_bands(cs, std::slice::from_ref(band))?;
    Ok(out.pop().flatten().expect("band resolved above"))
}

/// wPLI for several bands in one pass over the pairs. Bands without any bin
/// at the available resolution yield `None`.
pub fn wpli_bands(cs: &CrossSpectrum, bands: &[BandSpec]) -> Result<Vec<Option<WpliMatrix>>> {
    if cs.n_epochs() < 2 {
        return Err(Error::InsufficientData(format!(
            "wPLI needs at least 2 epochs, got {}",
            cs.n_epochs()
        )));
    }
    let ranges: Vec<Option<std::ops::Range<usize>>> =
        bands.iter().map(|b| band_bins(&cs.freqs, b).ok()).collect();
    let n_bins = cs.n_bins();
    let n_ch = cs.channels.len();
    let pairs: Vec<(usize, usize)> = (0..n_ch).flat_map(|i| (i + 1..n_ch).map(move |j| (i, j))).collect();

    let per_pair: Vec<Vec<f64>> = pairs
        .par_iter()
        .map_init(
            || (vec![0.0; n_bins], vec![0.0; n_bins]),
            |(num, den), &(i, j)| {
                num.iter_mut().for_each(|v| *v = 0.0);
                den.iter_mut().for_each(|v| *v = 0.0);
                let zi = &cs.coeffs[i];
                let zj = &cs.coeffs[j];
                for e in 0..cs.n_epochs {
                    let a = &zi[e * n_bins..(e + 1) * n_bins];
                    let b = &zj[e * n_bins..(e + 1) * n_bins];
                    for k in 0..n_bins {
                        // Im(a·conj(b))
                        let im = a[k].im * b[k].re - a[k].re * b[k].im;
                        num[k] += im;
                        den[k] += im.abs();
                    }
                }
                ranges
                    .iter()
                    .map(|r| match r {
                        Some(r) => {
                            // Bins with no cross-spectral energy (0/0) are skipped.
                            let floor = r.clone().map(|k| den[k]).fold(0.0, f64::max) * EMPTY_BIN;
                            let (s, n) = r
                                .clone()
                                .filter(|&k| den[k] > floor)
                                .fold((0.0, 0usize), |(s, n), k| (s + num[k].abs() / den[k], n + 1));
                            if n == 0 {
                                0.0
                            } else {
                                (s / n as f64).min(1.0)
                            }
                        }
                        None => f64::NAN,
                    })
                    .collect()
            },
        )
        .collect();

    Ok(bands
        .iter()
        .enumerate()
        .map(|(b, band)| {
            ranges[b].as_ref()?;
            let mut values = vec![f64::NAN; n_ch * n_ch];
            for (&(i, j), vals) in pairs.iter().zip(&per_pair) {
                values[i * n_ch + j] = vals[b];
                values[j * n_ch + i] = vals[b];
            }
            Some(WpliMatrix {
                band: *band,
                channels: cs.channels.clone(),
                n_epochs: cs.n_epochs,
                resolution_hz: cs.resolution(),
                values,
            })
        })
        .collect())
}

/// Mean wPLI per region pair (15 values, fixed pair order). Within-region
/// cells average all distinct channel pairs inside the region.
pub fn region_wpli(m: &WpliMatrix, map: &RegionMap) -> Result<Vec<f64>> {
    let regions = map.regions_for(&m.channels);
    RegionPair::all()
        .into_iter()
        .map(|pair| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for (i, j, v) in m.pairs() {
                let (Some(ri), Some(rj)) = (regions[i], regions[j]) else { continue };
                if RegionPair::new(ri, rj) == pair {
                    sum += v;
                    count += 1;
                }
            }
            if count == 0 {
                Err(Error::invalid(format!("region pair {pair} has no channel pairs")))
            } else {
                Ok(sum / count as f64)
            }
        })
        .collect()
}

/// Band × region-pair table from per-band matrices (`None` rows stay empty).
pub fn region_wpli_table(
    bands: &[BandSpec],
    matrices: &[Option<WpliMatrix>],
    map: &RegionMap,
) -> Result<BandRegionTable> {
    let mut table = BandRegionTable::new(Metric::Wpli, bands.to_vec());
    for (b, m) in matrices.iter().enumerate() {
        let Some(m) = m else { continue };
        table.resolution_hz = Some(m.resolution_hz);
        for (c, v) in region_wpli(m, map)?.into_iter().enumerate() {
            table.values[b][c] = Some(v);
            table.n_epochs_used[b][c] = m.n_epochs;
        }
    }
    Ok(table)
}

/// Regions with fewer than two mapped channels cannot have within-region cells.
pub fn check_montage_for_wpli(map: &RegionMap) -> Result<()> {
    for r in Region::ALL {
        if map.members(r).len() < 2 {
            return Err(Error::invalid(format!(
                "region {} needs at least two channels for within-region wPLI",
                r.as_str()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_bands, default_region_map, BandName, Condition, Epoch, Session};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn set(channels: usize, epochs: Vec<Vec<Vec<f64>>>, fs: f64) -> EpochSet {
        EpochSet {
            channels: (0..channels).map(|c| format!("E{c}")).collect(),
            fs,
            epochs: epochs
                .into_iter()
                .enumerate()
                .map(|(i, data)| Epoch {
                    data,
                    condition: Condition::Nap,
                    session: Session::Nap,
                    rejected: false,
                    index: i,
                    onset_s: 0.0,
                })
                .collect(),
        }
    }

    fn band(name: BandName) -> BandSpec {
        default_bands().into_iter().find(|b| b.name == name).unwrap()
    }

    fn noise_set(n_ch: usize, n_ep: usize, len: usize, seed: u64) -> EpochSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let eps = (0..n_ep)
            .map(|_| (0..n_ch).map(|_| (0..len).map(|_| normal.sample(&mut rng)).collect()).collect())
            .collect();
        set(n_ch, eps, 250.0)
    }

    #[test]
    fn identical_signals_have_real_cross_spectrum_and_zero_wpli() {
        let base = noise_set(1, 10, 250, 1);
        let eps = base.epochs.iter().map(|e| vec![e.data[0].clone(), e.data[0].clone()]).collect();
        let s = set(2, eps, 250.0);
        let cs = cross_spectrum(&s, Taper::Hann).unwrap();
        for e in 0..cs.n_epochs() {
            for k in 0..cs.n_bins() {
                assert_eq!(cs.get(0, 1, e, k).im, 0.0);
                assert_eq!(cs.get(0, 1, e, k), cs.get(1, 0, e, k).conj());
                let d = cs.get(0, 0, e, k);
                assert!(d.im == 0.0 && d.re >= 0.0);
            }
        }
        for b in default_bands() {
            assert_eq!(wpli(&cs, &b).unwrap().get(0, 1), Some(0.0));
        }
    }

    #[test]
    fn quarter_period_delay_gives_quadrature_phase() {
        let fs = 250.0;
        let f0 = 10.0;
        let n = 250;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * f0 * i as f64 / fs).sin()).collect();
        // delay by a quarter period: y(t) = x(t - T/4)
        let y: Vec<f64> = (0..n).map(|i| (2.0 * PI * f0 * (i as f64 / fs - 0.25 / f0)).sin()).collect();
        let cs = cross_spectrum(&set(2, vec![vec![x, y]], fs), Taper::Hann).unwrap();
        let k = cs.freqs.iter().position(|&f| (f - f0).abs() < 1e-9).unwrap();
        let phase = cs.get(0, 1, 0, k).arg();
        assert!((phase.abs() - PI / 2.0).abs() < 1e-3, "{phase}");
    }

    #[test]
    fn broadband_constant_lag_gives_unity() {
        // every bin carries power; channel 1 lags channel 0 by 90° at all frequencies
        let fs = 250.0;
        let n = 750;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let eps: Vec<Vec<Vec<f64>>> = (0..100)
            .map(|_| {
                let mut a = vec![0.0; n];
                let mut b = vec![0.0; n];
                for k in 1..n / 2 {
                    let f = k as f64 * fs / n as f64;
                    let ph: f64 = rng.gen_range(0.0..2.0 * PI);
                    for t in 0..n {
                        let arg = 2.0 * PI * f * t as f64 / fs + ph;
                        a[t] += arg.sin();
                        b[t] += (arg - PI / 2.0).sin();
                    }
                }
                vec![a, b]
            })
            .collect();
        let cs = cross_spectrum(&set(2, eps, fs), Taper::Hann).unwrap();
        for b in default_bands() {
            let v = wpli(&cs, &b).unwrap().get(0, 1).unwrap();
            assert!(v >= 0.99, "{:?}: {v}", b.name);
        }
    }

    #[test]
    fn independent_noise_is_near_zero() {
        let s = noise_set(2, 1200, 750, 4);
        let cs = cross_spectrum(&s, Taper::Hann).unwrap();
        for b in default_bands() {
            let v = wpli(&cs, &b).unwrap().get(0, 1).unwrap();
            assert!(v < 0.1, "{:?}: {v}", b.name);
        }
    }

    #[test]
    fn needs_two_epochs() {
        let s = noise_set(2, 1, 100, 2);
        let cs = cross_spectrum(&s, Taper::Hann).unwrap();
        assert!(wpli(&cs, &band(BandName::Alpha)).is_err());
    }

    #[test]
    fn rejected_only_input_errors() {
        let mut s = noise_set(2, 3, 100, 2);
        s.epochs.iter_mut().for_each(|e| e.rejected = true);
        assert!(cross_spectrum(&s, Taper::Hann).is_err());
    }

    fn lagged_pair_with_noise(seed: u64, mix: f64) -> EpochSet {
        let fs = 250.0;
        let n = 250;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let eps = (0..60)
            .map(|_| {
                let ph: f64 = rng.gen_range(0.0..2.0 * PI);
                let common: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
                let a: Vec<f64> = (0..n)
                    .map(|t| (2.0 * PI * 10.0 * t as f64 / fs + ph).sin() + 2.0 * normal.sample(&mut rng) + mix * common[t])
                    .collect();
                let b: Vec<f64> = (0..n)
                    .map(|t| (2.0 * PI * 10.0 * t as f64 / fs + ph - 0.6).sin() + 2.0 * normal.sample(&mut rng) + mix * common[t])
                    .collect();
                vec![a, b]
            })
            .collect();
        set(2, eps, fs)
    }

    #[test]
    fn sign_flip_scale_and_symmetry_invariance() {
        let s = lagged_pair_with_noise(21, 0.0);
        let alpha = band(BandName::Alpha);
        let base = wpli(&cross_spectrum(&s, Taper::Hann).unwrap(), &alpha).unwrap();
        let mut flipped = s.clone();
        let mut scaled = s.clone();
        for e in flipped.epochs.iter_mut() {
            e.data[1].iter_mut().for_each(|v| *v = -*v);
        }
        for e in scaled.epochs.iter_mut() {
            e.data[0].iter_mut().for_each(|v| *v *= 7.5);
        }
        let f = wpli(&cross_spectrum(&flipped, Taper::Hann).unwrap(), &alpha).unwrap();
        let k = wpli(&cross_spectrum(&scaled, Taper::Hann).unwrap(), &alpha).unwrap();
        let b = base.get(0, 1).unwrap();
        assert!((f.get(0, 1).unwrap() - b).abs() < 1e-12);
        assert!((k.get(0, 1).unwrap() - b).abs() < 1e-12);
        assert_eq!(base.get(0, 1), base.get(1, 0));
        assert_eq!(base.get(0, 0), None);
    }

    #[test]
    fn common_zero_lag_source_does_not_inflate() {
        let alpha = band(BandName::Alpha);
        let mut raised = 0;
        let (mut sum_clean, mut sum_mixed) = (0.0, 0.0);
        for seed in 0..10 {
            let clean = wpli(&cross_spectrum(&lagged_pair_with_noise(seed, 0.0), Taper::Hann).unwrap(), &alpha)
                .unwrap()
                .get(0, 1)
                .unwrap();
            let mixed = wpli(&cross_spectrum(&lagged_pair_with_noise(seed, 3.0), Taper::Hann).unwrap(), &alpha)
                .unwrap()
                .get(0, 1)
                .unwrap();
            sum_clean += clean;
            sum_mixed += mixed;
            raised += (mixed > clean + 0.05) as usize;
        }
        assert!(sum_mixed <= sum_clean, "{sum_mixed} > {sum_clean}");
        assert!(raised <= 1);
    }

    fn labels() -> Vec<String> {
        ["Fp1", "Fp2", "C3", "C4", "T7", "T8", "P3", "P4", "O1", "O2"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn matrix(chans: &[String], f: impl Fn(usize, usize) -> f64) -> WpliMatrix {
        let n = chans.len();
        let mut v = vec![f64::NAN; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    v[i * n + j] = f(i.min(j), i.max(j));
                }
            }
        }
        WpliMatrix::from_values(band(BandName::Alpha), chans.to_vec(), 10, v).unwrap()
    }

    #[test]
    fn region_means() {
        let chans = labels();
        let map = default_region_map(&chans);
        let c = matrix(&chans, |_, _| 0.37);
        assert!(region_wpli(&c, &map).unwrap().iter().all(|&v| (v - 0.37).abs() < 1e-15));

        let m = matrix(&chans, |i, j| if (i, j) == (0, 1) { 0.4 } else { 0.1 });
        assert_eq!(region_wpli(&m, &map).unwrap()[0], 0.4);

        // block structure: frontal ↔ parietal high
        let regions = map.regions_for(&chans);
        let m = matrix(&chans, |i, j| {
            let pair = RegionPair::new(regions[i].unwrap(), regions[j].unwrap());
            if pair == RegionPair::new(Region::Frontal, Region::Parietal) {
                0.9
            } else {
                0.05 + 0.01 * ((i * 7 + j) % 5) as f64
            }
        });
        let row = region_wpli(&m, &map).unwrap();
        let best = row.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        assert_eq!(RegionPair::all()[best].label(), "F-P");
    }

    #[test]
    fn single_channel_region_within_cell_errors() {
        let chans: Vec<String> = ["Fp1", "Fp2", "Cz", "T7", "T8", "P3", "P4", "O1", "O2"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let map = default_region_map(&chans);
        assert!(region_wpli(&matrix(&chans, |_, _| 0.2), &map).is_err());
        assert!(check_montage_for_wpli(&map).is_err());
    }
}
