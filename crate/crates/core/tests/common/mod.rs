#![allow(dead_code)]

use std::path::Path;

use napeeg::pipeline::{LoadedConfig, StudyConfig};
use napeeg::synth::{write_study, NapTemplate, StudyTemplate};

/// A study small enough for integration tests: 10-20 montage, one-minute naps.
pub fn template(n_subjects: usize, seed: u64) -> StudyTemplate {
    StudyTemplate {
        n_subjects,
        seed,
        nap: NapTemplate {
            fs: 250.0,
            duration_s: 60.0,
            trim_s: 6.0,
            ..NapTemplate::default()
        },
        ..StudyTemplate::default()
    }
}

pub fn write(t: &StudyTemplate, dir: &Path) -> LoadedConfig {
    let path = write_study(t, dir).expect("study written");
    StudyConfig::load(&path).expect("config loads")
}
