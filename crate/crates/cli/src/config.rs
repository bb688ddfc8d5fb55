//! Optional TOML file for `mine`. Every key mirrors a command-line flag; a
//! flag given on the command line overrides the file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub miner: Option<String>,
    pub input: Option<PathBuf>,
    pub connect: Option<String>,
    pub codec: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub queue_size: Option<usize>,
    pub unbounded: Option<bool>,
    pub window_size: Option<usize>,
    pub alpha: Option<f64>,
    pub step_down: Option<f64>,
    pub step_up: Option<f64>,
    pub tolerance: Option<f64>,
    pub epsilon: Option<f64>,
    pub mine_every: Option<u64>,
    pub eval_window: Option<usize>,
    pub dependency: Option<f64>,
    pub and_threshold: Option<f64>,
    pub snapshot_every: Option<u64>,
    pub no_timing: Option<bool>,
    pub skip_bad_events: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
