use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Frontal,
    Central,
    Temporal,
    Parietal,
    Occipital,
}

impl Region {
    pub const ALL: [Region; 5] = [
        Region::Frontal,
        Region::Central,
        Region::Temporal,
        Region::Parietal,
        Region::Occipital,
    ];

    pub fn abbrev(self) -> &'static str {
        match self {
            Region::Frontal => "F",
            Region::Central => "C",
            Region::Temporal => "T",
            Region::Parietal => "P",
            Region::Occipital => "O",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Frontal => "frontal",
            Region::Central => "central",
            Region::Temporal => "temporal",
            Region::Parietal => "parietal",
            Region::Occipital => "occipital",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Region::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s) || r.abbrev().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown region {s:?}")))
    }
}

/// Unordered pair of regions, stored with `first <= second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionPair {
    first: Region,
    second: Region,
}

impl RegionPair {
    pub fn new(a: Region, b: Region) -> Self {
        if a <= b {
            Self { first: a, second: b }
        } else {
            Self { first: b, second: a }
        }
    }

    pub fn first(self) -> Region {
        self.first
    }

    pub fn second(self) -> Region {
        self.second
    }

    pub fn is_within(self) -> bool {
        self.first == self.second
    }

    /// The 15 pairs in column order F-F, F-C, …, P-O, O-O.
    pub fn all() -> Vec<RegionPair> {
        let mut out = Vec::with_capacity(15);
        for (i, &a) in Region::ALL.iter().enumerate() {
            for &b in &Region::ALL[i..] {
                out.push(RegionPair { first: a, second: b });
            }
        }
        out
    }

    pub fn label(self) -> String {
        format!("{}-{}", self.first.abbrev(), self.second.abbrev())
    }
}

impl fmt::Display for RegionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first.abbrev(), self.second.abbrev())
    }
}

impl FromStr for RegionPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| Error::invalid(format!("bad region pair {s:?}")))?;
        Ok(RegionPair::new(a.parse()?, b.parse()?))
    }
}

/// Overrides applied on top of the prefix rule.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionMapConfig {
    /// Labels never assigned to a region (reference, ground, EOG, ...).
    pub exclude: Vec<String>,
    /// Explicit label → region assignments; these win over the prefix rule.
    pub assign: BTreeMap<String, Region>,
}

/// Assignment of channel labels to scalp regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    assignment: Vec<(String, Region)>,
    excluded: Vec<String>,
    warnings: Vec<String>,
}

impl RegionMap {
    /// Builds a map from explicit assignments.
    pub fn from_assignments(
        assignment: Vec<(String, Region)>,
        excluded: Vec<String>,
    ) -> Self {
        Self {
            assignment,
            excluded,
            warnings: Vec::new(),
        }
    }

    /// Prefix rule plus configured overrides. Every label ends up either
    /// assigned or excluded.
    pub fn with_config(channels: &[String], config: &RegionMapConfig) -> Self {
        let mut assignment = Vec::new();
        let mut excluded = Vec::new();
        let mut warnings = Vec::new();
        for label in channels {
            if config.exclude.iter().any(|x| x.eq_ignore_ascii_case(label)) {
                excluded.push(label.clone());
                continue;
            }
            let explicit = config
                .assign
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(label))
                .map(|(_, r)| *r);
            match explicit.or_else(|| region_by_prefix(label)) {
                Some(r) => assignment.push((label.clone(), r)),
                None => {
                    warnings.push(format!("channel {label:?} matches no region; excluded"));
                    excluded.push(label.clone());
                }
            }
        }
        Self {
            assignment,
            excluded,
            warnings,
        }
    }

    pub fn region_of(&self, label: &str) -> Option<Region> {
        self.assignment
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, r)| *r)
    }

    pub fn assignment(&self) -> &[(String, Region)] {
        &self.assignment
    }

    pub fn excluded(&self) -> &[String] {
        &self.excluded
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Labels assigned to `region`, in input order.
    pub fn members(&self, region: Region) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, r)| *r == region)
            .map(|(l, _)| l.as_str())
            .collect()
    }

    /// Region of each channel in `channels` (by position); `None` for
    /// excluded or unknown labels.
    pub fn regions_for(&self, channels: &[String]) -> Vec<Option<Region>> {
        channels.iter().map(|c| self.region_of(c)).collect()
    }

    /// A montage is valid when all five regions have at least one channel.
    pub fn validate(&self) -> Result<()> {
        for r in Region::ALL {
            if self.members(r).is_empty() {
                return Err(Error::invalid(format!("region {} has no channels", r.as_str())));
            }
        }
        Ok(())
    }
}

/// Default 10-20 prefix assignment; unknown labels are excluded with a warning.
pub fn default_region_map(channels: &[String]) -> RegionMap {
    RegionMap::with_config(channels, &RegionMapConfig::default())
}

/// Fp/AF/F → frontal; FC/C → central; FT/T/TP → temporal; CP/P → parietal;
/// PO/O → occipital. A trailing midline `z` is ignored.
fn region_by_prefix(label: &str) -> Option<Region> {
    let letters: String = label
        .trim()
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    let mut prefix = letters.to_ascii_uppercase();
    if prefix.len() > 1 && prefix.ends_with('Z') {
        prefix.pop();
    }
    match prefix.as_str() {
        "FP" | "AF" | "F" => Some(Region::Frontal),
        "FC" | "C" => Some(Region::Central),
        "FT" | "T" | "TP" => Some(Region::Temporal),
        "CP" | "P" => Some(Region::Parietal),
        "PO" | "O" => Some(Region::Occipital),
        _ => None,
    }
}
