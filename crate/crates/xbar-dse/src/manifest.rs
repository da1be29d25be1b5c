//! Run manifest: everything needed to repeat a run.

use crate::config::Settings;
use serde::{Deserialize, Serialize};

pub const FORMAT: &str = "xbar-run-manifest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub xbar_core: String,
    pub xbar_dse: String,
}

impl Versions {
    pub fn current() -> Self {
        Self {
            xbar_core: xbar_core::VERSION.to_string(),
            xbar_dse: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub command: String,
    /// Arguments after the program name.
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    /// Fully resolved configuration; pass this file back with `--config`.
    pub settings: Settings,
    pub versions: Versions,
    pub threads: usize,
    /// Seconds since the Unix epoch at start.
    pub started_unix: u64,
    pub wall_time_s: f64,
    /// Artifacts written next to the manifest.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, settings: &Settings, threads: usize) -> Self {
        Self {
            format: FORMAT.to_string(),
            command: command.to_string(),
            argv,
            seed: settings.seed,
            settings: settings.clone(),
            versions: Versions::current(),
            threads,
            started_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            wall_time_s: 0.0,
            outputs: Vec::new(),
        }
    }
}
