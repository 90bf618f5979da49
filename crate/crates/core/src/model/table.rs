use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BandSpec, Region, RegionPair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    PsdDb,
    Wpli,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::PsdDb => "psd_db",
            Metric::Wpli => "wpli",
        }
    }

    /// Column labels: region abbreviations for PSD, region pairs for wPLI.
    pub fn columns(self) -> Vec<String> {
        match self {
            Metric::PsdDb => Region::ALL.iter().map(|r| r.abbrev().to_string()).collect(),
            Metric::Wpli => RegionPair::all().into_iter().map(RegionPair::label).collect(),
        }
    }
}

/// Scalar feature per frequency band (rows) and region or region pair (columns).
///
/// Cells that could not be computed (e.g. a band without any frequency bin at
/// the epoch's resolution) hold `None` and report zero epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRegionTable {
    pub metric: Metric,
    pub bands: Vec<BandSpec>,
    pub values: Vec<Vec<Option<f64>>>,
    pub n_epochs_used: Vec<Vec<usize>>,
    /// Frequency resolution of the underlying spectra, Hz.
    pub resolution_hz: Option<f64>,
}

impl BandRegionTable {
    pub fn new(metric: Metric, bands: Vec<BandSpec>) -> Self {
        let cols = metric.columns().len();
        let rows = bands.len();
        Self {
            metric,
            bands,
            values: vec![vec![None; cols]; rows],
            n_epochs_used: vec![vec![0; cols]; rows],
            resolution_hz: None,
        }
    }

    pub fn n_cols(&self) -> usize {
        self.metric.columns().len()
    }

    pub fn get(&self, band: usize, col: usize) -> Option<f64> {
        self.values[band][col]
    }

    pub fn region_value(&self, band: usize, region: Region) -> Option<f64> {
        debug_assert_eq!(self.metric, Metric::PsdDb);
        self.values[band][region.index()]
    }

    pub fn pair_value(&self, band: usize, pair: RegionPair) -> Option<f64> {
        debug_assert_eq!(self.metric, Metric::Wpli);
        let col = RegionPair::all().iter().position(|p| *p == pair).unwrap();
        self.values[band][col]
    }

    pub fn n_cells(&self) -> usize {
        self.bands.len() * self.n_cols()
    }

    pub fn check(&self) -> Result<()> {
        let cols = self.n_cols();
        if self.values.len() != self.bands.len()
            || self.n_epochs_used.len() != self.bands.len()
            || self.values.iter().any(|r| r.len() != cols)
            || self.n_epochs_used.iter().any(|r| r.len() != cols)
        {
            return Err(Error::invalid("table shape does not match bands × columns"));
        }
        for (vrow, nrow) in self.values.iter().zip(&self.n_epochs_used) {
            for (v, n) in vrow.iter().zip(nrow) {
                if v.is_some() && *n == 0 {
                    return Err(Error::invalid("reported cell with zero epochs"));
                }
                if let (Metric::Wpli, Some(v)) = (self.metric, v) {
                    if !(0.0..=1.0).contains(v) {
                        return Err(Error::invalid(format!("wPLI value {v} outside [0, 1]")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    metric: Metric,
    bands: Vec<BandSpec>,
    columns: Vec<String>,
    n_epochs_used: Vec<Vec<usize>>,
    resolution_hz: Option<f64>,
}

pub(crate) fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Writes the table as CSV (band rows, region or pair columns) plus a
/// `<path>.json` sidecar carrying epoch counts and band edges.
pub fn save_table(table: &BandRegionTable, path: &Path) -> Result<()> {
    table.check()?;
    let columns = table.metric.columns();
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::invalid(format!("{other:?}")),
    })?;
    let mut header = vec!["band".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header)?;
    for (band, row) in table.bands.iter().zip(&table.values) {
        let mut rec = vec![band.name.to_string()];
        rec.extend(row.iter().map(|v| fmt_opt(*v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let sidecar = Sidecar {
        metric: table.metric,
        bands: table.bands.clone(),
        columns,
        n_epochs_used: table.n_epochs_used.clone(),
        resolution_hz: table.resolution_hz,
    };
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(&side, e))?;
    Ok(())
}

pub fn load_table(path: &Path) -> Result<BandRegionTable> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text)?;
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.len() != sidecar.columns.len() + 1 {
        return Err(Error::invalid("table header does not match sidecar"));
    }
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut cells = Vec::with_capacity(rec.len() - 1);
        for (col, cell) in rec.iter().enumerate().skip(1) {
            let v = if cell == "NA" {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|_| Error::NonNumeric {
                    row: row + 2,
                    col: col + 1,
                    value: cell.to_string(),
                })?)
            };
            cells.push(v);
        }
        values.push(cells);
    }
    let table = BandRegionTable {
        metric: sidecar.metric,
        bands: sidecar.bands,
        values,
        n_epochs_used: sidecar.n_epochs_used,
        resolution_hz: sidecar.resolution_hz,
    };
    table.check()?;
    Ok(table)
}
