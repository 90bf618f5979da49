//! Batch analysis of nap EEG and memory-recall recordings: preprocessing,
//! band-limited spectral power, weighted phase lag index connectivity,
//! memory-task scoring and a nonparametric statistics battery.

pub mod behavior;
pub mod connectivity;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod preproc;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
