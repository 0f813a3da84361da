//! Bundled synthetic trial with a continuous and a binary outcome.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

pub const DEMO_CSV: &str = include_str!("../data/demo_trial.csv");
pub const DEMO_MANIFEST: &str = include_str!("../data/demo_manifest.toml");
pub const DEMO_CONTINUOUS_CONFIG: &str = include_str!("../data/demo_continuous.toml");
pub const DEMO_BINARY_CONFIG: &str = include_str!("../data/demo_binary.toml");

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ArmManifest {
    pub rows: usize,
    pub outcome_missing: usize,
    pub outcome_above_40: usize,
}

/// Expected marginals of the demo file.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DemoManifest {
    pub file: String,
    pub rows: usize,
    pub baseline_column: String,
    pub baseline_missing: usize,
    pub baseline_observed_mean: f64,
    pub control: ArmManifest,
    pub intervention: ArmManifest,
}

impl DemoManifest {
    pub fn bundled() -> Result<Self> {
        toml::from_str(DEMO_MANIFEST).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Files written by [`write_demo`].
#[derive(Clone, Debug)]
pub struct DemoFiles {
    pub data: PathBuf,
    pub manifest: PathBuf,
    pub continuous_config: PathBuf,
    pub binary_config: PathBuf,
}

/// Writes the demo data, manifest and the two example configurations into `dir`.
pub fn write_demo(dir: &Path) -> Result<DemoFiles> {
    std::fs::create_dir_all(dir)?;
    let files = DemoFiles {
        data: dir.join("demo_trial.csv"),
        manifest: dir.join("demo_manifest.toml"),
        continuous_config: dir.join("demo_continuous.toml"),
        binary_config: dir.join("demo_binary.toml"),
    };
    std::fs::write(&files.data, DEMO_CSV)?;
    std::fs::write(&files.manifest, DEMO_MANIFEST)?;
    std::fs::write(&files.continuous_config, DEMO_CONTINUOUS_CONFIG)?;
    std::fs::write(&files.binary_config, DEMO_BINARY_CONFIG)?;
    Ok(files)
}
