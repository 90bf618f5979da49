//! Butterworth IIR design (bilinear transform, second-order sections) and
//! zero-phase forward–backward application.

use std::f64::consts::PI;

/// One biquad in transposed direct form II, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Sos {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// State that makes a constant unit input produce a constant output.
    fn steady_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[2] * g;
        let z1 = self.b[1] - self.a[1] * g + z2;
        [z1, z2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Lowpass,
    Highpass,
}

/// Butterworth sections of the given order with cutoff `fc` (Hz) at rate `fs`.
pub fn butterworth(kind: Kind, order: usize, fc: f64, fs: f64) -> Vec<Sos> {
    assert!(order >= 1, "filter order must be positive");
    assert!(fc > 0.0 && fc < fs / 2.0, "cutoff must lie in (0, fs/2)");
    let k = (PI * fc / fs).tan();
    let mut out = Vec::with_capacity(order.div_ceil(2));
    for i in 0..order / 2 {
        let q = 1.0 / (2.0 * (PI * (2 * i + 1) as f64 / (2 * order) as f64).sin());
        let norm = 1.0 / (1.0 + k / q + k * k);
        let a1 = 2.0 * (k * k - 1.0) * norm;
        let a2 = (1.0 - k / q + k * k) * norm;
        let b = match kind {
            Kind::Lowpass => {
                let b0 = k * k * norm;
                [b0, 2.0 * b0, b0]
            }
            Kind::Highpass => [norm, -2.0 * norm, norm],
        };
        out.push(Sos {
            b,
            a: [1.0, a1, a2],
        });
    }
    if order % 2 == 1 {
        let a1 = (k - 1.0) / (k + 1.0);
        let b = match kind {
            Kind::Lowpass => [k / (1.0 + k), k / (1.0 + k), 0.0],
            Kind::Highpass => [1.0 / (1.0 + k), -1.0 / (1.0 + k), 0.0],
        };
        out.push(Sos {
            b,
            a: [1.0, a1, 0.0],
        });
    }
    out
}

/// Runs the cascade over `x` in place, starting from `x[0]`-scaled steady state.
fn sosfilt_steady(sos: &[Sos], x: &mut [f64]) {
    let Some(&x0) = x.first() else { return };
    let mut level = x0;
    for s in sos {
        let [mut z1, mut z2] = s.steady_state();
        z1 *= level;
        z2 *= level;
        level *= s.dc_gain();
        let [b0, b1, b2] = s.b;
        let [_, a1, a2] = s.a;
        for v in x.iter_mut() {
            let xin = *v;
            let y = b0 * xin + z1;
            z1 = b1 * xin - a1 * y + z2;
            z2 = b2 * xin - a2 * y;
            *v = y;
        }
    }
}

/// Causal filtering with steady-state initial conditions.
pub fn sosfilt(sos: &[Sos], x: &mut [f64]) {
    sosfilt_steady(sos, x);
}

/// Default edge padding length (odd extension), as in common `filtfilt` implementations.
pub fn default_padlen(sos: &[Sos]) -> usize {
    let trailing_zero = sos.iter().filter(|s| s.b[2] == 0.0 && s.a[2] == 0.0).count();
    3 * (2 * sos.len() + 1 - trailing_zero)
}

/// Zero-phase forward–backward filtering with odd-extension padding.
pub fn sosfiltfilt(sos: &[Sos], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return x.to_vec();
    }
    let pad = default_padlen(sos).min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    let first = x[0];
    let last = x[n - 1];
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));
    sosfilt_steady(sos, &mut ext);
    ext.reverse();
    sosfilt_steady(sos, &mut ext);
    ext.reverse();
    ext.drain(..pad);
    ext.truncate(n);
    ext
}

/// Magnitude response of the cascade at frequency `f` (Hz).
pub fn magnitude(sos: &[Sos], f: f64, fs: f64) -> f64 {
    let w = 2.0 * PI * f / fs;
    let z1 = num_complex::Complex64::from_polar(1.0, -w);
    let z2 = z1 * z1;
    sos.iter()
        .map(|s| {
            let num = s.b[0] + z1 * s.b[1] + z2 * s.b[2];
            let den = s.a[0] + z1 * s.a[1] + z2 * s.a[2];
            (num / den).norm()
        })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Analog Butterworth prototype mapped through the prewarped bilinear transform.
    fn butter_mag_oracle(kind: Kind, order: usize, fc: f64, f: f64, fs: f64) -> f64 {
        let ratio = (PI * f / fs).tan() / (PI * fc / fs).tan();
        let r = match kind {
            Kind::Lowpass => ratio,
            Kind::Highpass => 1.0 / ratio,
        };
        1.0 / (1.0 + r.powi(2 * order as i32)).sqrt()
    }

    #[test]
    fn design_matches_prewarped_prototype() {
        for &(kind, order, fc) in &[
            (Kind::Lowpass, 4, 50.0),
            (Kind::Highpass, 4, 0.5),
            (Kind::Lowpass, 3, 20.0),
            (Kind::Highpass, 5, 2.0),
            (Kind::Lowpass, 8, 100.0),
        ] {
            let fs = 1000.0;
            let sos = butterworth(kind, order, fc, fs);
            for f in [0.1, 0.5, 1.0, 5.0, 10.0, 45.0, 60.0, 120.0, 300.0] {
                let got = magnitude(&sos, f, fs);
                let want = butter_mag_oracle(kind, order, fc, f, fs);
                assert!((got - want).abs() < 1e-9, "{kind:?} n={order} fc={fc} f={f}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn constant_input_stays_constant_through_lowpass() {
        let sos = butterworth(Kind::Lowpass, 4, 10.0, 250.0);
        let y = sosfiltfilt(&sos, &[5.0; 500]);
        assert!(y.iter().all(|v| (v - 5.0).abs() < 1e-9));
    }

    #[test]
    fn zero_phase_has_no_lag() {
        let fs = 250.0;
        let sos = butterworth(Kind::Lowpass, 4, 30.0, fs);
        let x: Vec<f64> = (0..2500).map(|i| (2.0 * PI * 10.0 * i as f64 / fs).sin()).collect();
        let y = sosfiltfilt(&sos, &x);
        let mid = 500..2000;
        let best = (-10i64..=10)
            .max_by(|&a, &b| {
                let xc = |lag: i64| -> f64 {
                    mid.clone().map(|i| x[i] * y[(i as i64 + lag) as usize]).sum()
                };
                xc(a).partial_cmp(&xc(b)).unwrap()
            })
            .unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn short_input_passthrough() {
        let sos = butterworth(Kind::Lowpass, 2, 10.0, 100.0);
        assert_eq!(sosfiltfilt(&sos, &[3.0]), vec![3.0]);
        assert!(sosfiltfilt(&sos, &[]).is_empty());
    }
}
