use rand::Rng;

use super::{mean, RngSpec, StatResult, TestKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermMethod {
    /// Enumerate all `2ⁿ` sign patterns when `2ⁿ <= resamples`, otherwise sample.
    Auto,
    Exact,
    Sampled,
}

/// Two-sided paired permutation test on `a − b` by random sign flips.
///
/// The statistic is the paired t. Because `Σ d²` is invariant under sign
/// flips, `|t|` is monotone in `|Σ sᵢdᵢ|`, which is what the null
/// distribution compares. Sampled p-values are `(count + 1) / (r + 1)`.
pub fn perm_paired(a: &[f64], b: &[f64], resamples: usize, rng: &RngSpec, test_id: &str) -> Result<StatResult> {
    perm_paired_with(a, b, resamples, PermMethod::Auto, &mut rng.stream(test_id))
}

pub fn perm_paired_with<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    resamples: usize,
    method: PermMethod,
    rng: &mut R,
) -> Result<StatResult> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("paired test needs n >= 2, got {n}")));
    }
    if resamples == 0 {
        return Err(Error::invalid("resample count must be positive"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite paired difference"));
    }
    if d.iter().all(|&v| v == 0.0) {
        let mut r = StatResult::new(TestKind::PermPaired, 0.0, 1.0, n);
        r.note = Some("all differences zero".into());
        return Ok(r);
    }

    let t_obs = paired_t(&d);
    let observed = d.iter().sum::<f64>().abs();
    let tol = 1e-10 * d.iter().map(|v| v.abs()).sum::<f64>();
    let threshold = observed - tol;

    let exact = match method {
        PermMethod::Exact => true,
        PermMethod::Sampled => false,
        PermMethod::Auto => n < usize::BITS as usize - 1 && (1usize << n) <= resamples,
    };
    let p = if exact {
        if n > 30 {
            return Err(Error::invalid(format!("exact enumeration over 2^{n} patterns is infeasible")));
        }
        let total = 1u64 << n;
        // Gray-code walk: each step flips one sign.
        let mut signs = vec![1.0; n];
        let mut sum: f64 = d.iter().sum();
        let mut count = (sum.abs() >= threshold) as u64;
        for g in 1..total {
            let bit = g.trailing_zeros() as usize;
            signs[bit] = -signs[bit];
            sum += 2.0 * signs[bit] * d[bit];
            count += (sum.abs() >= threshold) as u64;
        }
        count as f64 / total as f64
    } else {
        let mut count = 0usize;
        for _ in 0..resamples {
            let mut s = 0.0;
            let mut bits = 0u64;
            for (i, v) in d.iter().enumerate() {
                if i % 64 == 0 {
                    bits = rng.gen();
                }
                s += if bits & 1 == 1 { *v } else { -*v };
                bits >>= 1;
            }
            count += (s.abs() >= threshold) as usize;
        }
        (count + 1) as f64 / (resamples + 1) as f64
    };
    let mut r = StatResult::new(TestKind::PermPaired, t_obs, p, n);
    r.exact = exact;
    if t_obs.is_infinite() {
        r.note = Some("differences have zero variance".into());
    }
    Ok(r)
}

/// Paired t of the differences; ±∞ when all differences are equal and non-zero.
pub(crate) fn paired_t(d: &[f64]) -> f64 {
    let n = d.len() as f64;
    let m = mean(d);
    let var = d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 || var.sqrt() <= 1e-15 * m.abs() {
        return if m > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    m / (var.sqrt() / n.sqrt())
}
