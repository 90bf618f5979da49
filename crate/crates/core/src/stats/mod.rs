//! Paired sign-flip permutation test, Pearson correlation, Kruskal–Wallis,
//! Bonferroni adjustment and the distribution tails they rely on.

mod dist;
mod kruskal;
mod pearson;
mod perm;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use dist::{chi_square_sf, student_t_sf};
pub use kruskal::{kruskal_wallis, midranks};
pub use pearson::pearson;
pub use perm::{perm_paired, perm_paired_with, PermMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    PermPaired,
    Pearson,
    KruskalWallis,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::PermPaired => "perm_paired",
            TestKind::Pearson => "pearson",
            TestKind::KruskalWallis => "kruskal_wallis",
        })
    }
}

/// Outcome of one test. `statistic` is the paired t, Pearson r or
/// Kruskal–Wallis H depending on `test`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub corrected: bool,
    pub n_comparisons: usize,
    /// Permutation tests: every sign pattern was enumerated.
    pub exact: bool,
    /// Set for degenerate inputs (e.g. all differences zero).
    pub note: Option<String>,
}

impl StatResult {
    pub(crate) fn new(test: TestKind, statistic: f64, p_value: f64, n: usize) -> Self {
        Self {
            test,
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            n,
            corrected: false,
            n_comparisons: 1,
            exact: false,
            note: None,
        }
    }

    /// Copy with a Bonferroni-adjusted p-value for a family of `m` tests.
    pub fn bonferroni(&self, m: usize) -> Self {
        let m = m.max(1);
        Self {
            p_value: (self.p_value * m as f64).min(1.0),
            corrected: true,
            n_comparisons: m,
            ..self.clone()
        }
    }
}

/// Seed and generator name for reproducible resampling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub algorithm: String,
}

impl RngSpec {
    pub const ALGORITHM: &'static str = "chacha8/sha256-stream";

    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            algorithm: Self::ALGORITHM.to_string(),
        }
    }

    /// Independent generator for one named test; depends only on `(seed, test_id)`.
    pub fn stream(&self, test_id: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(test_id.as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

/// Multiplies each p-value by the family size and clamps at 1.
pub fn bonferroni(p_values: &[f64]) -> Result<Vec<f64>> {
    let m = p_values.len() as f64;
    p_values
        .iter()
        .map(|&p| {
            if (0.0..=1.0).contains(&p) {
                Ok((p * m).min(1.0))
            } else {
                Err(Error::invalid(format!("p-value {p} outside [0, 1]")))
            }
        })
        .collect()
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
