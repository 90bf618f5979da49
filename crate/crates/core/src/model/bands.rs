use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandName {
    Delta,
    Theta,
    Alpha,
    Spindle,
    Beta,
    Gamma,
}

impl BandName {
    pub const ALL: [BandName; 6] = [
        BandName::Delta,
        BandName::Theta,
        BandName::Alpha,
        BandName::Spindle,
        BandName::Beta,
        BandName::Gamma,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BandName::Delta => "delta",
            BandName::Theta => "theta",
            BandName::Alpha => "alpha",
            BandName::Spindle => "spindle",
            BandName::Beta => "beta",
            BandName::Gamma => "gamma",
        }
    }
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BandName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BandName::ALL
            .into_iter()
            .find(|b| b.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown band {s:?}")))
    }
}

/// A frequency band with half-open edges `[f1, f2)` in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: BandName,
    pub f1: f64,
    pub f2: f64,
}

impl BandSpec {
    pub fn new(name: BandName, f1: f64, f2: f64) -> Result<Self> {
        if !(f1 > 0.0 && f2 > f1) {
            return Err(Error::invalid(format!(
                "band {name}: edges must satisfy 0 < f1 < f2, got {f1}..{f2}"
            )));
        }
        Ok(Self { name, f1, f2 })
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.f1 && f < self.f2
    }
}

/// delta 0.5–4, theta 4–7, alpha 7–12, spindle 12–16, beta 16–30, gamma 30–50 Hz.
pub fn default_bands() -> Vec<BandSpec> {
    let edges = [
        (BandName::Delta, 0.5, 4.0),
        (BandName::Theta, 4.0, 7.0),
        (BandName::Alpha, 7.0, 12.0),
        (BandName::Spindle, 12.0, 16.0),
        (BandName::Beta, 16.0, 30.0),
        (BandName::Gamma, 30.0, 50.0),
    ];
    edges
        .into_iter()
        .map(|(name, f1, f2)| BandSpec { name, f1, f2 })
        .collect()
}
