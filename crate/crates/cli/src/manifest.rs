use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record written next to every output set. Together with the code version
/// the command, configuration and seed reproduce the outputs bit for bit;
/// the timing fields are the only ones that change between reruns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub code_version: String,
    pub started_unix_seconds: f64,
    pub wall_clock_seconds: f64,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
}

pub fn code_version() -> &'static str {
    env!("GHOSTFIELD_GIT_HASH")
}

/// Wall-clock bookkeeping for one invocation.
pub struct RunTimer {
    started: SystemTime,
    clock: Instant,
}

impl RunTimer {
    pub fn start() -> Self {
        RunTimer {
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    pub fn finish(
        &self,
        command: &[String],
        subcommand: &str,
        config: serde_json::Value,
        seed: Option<u64>,
        dir: &Path,
        outputs: &[PathBuf],
    ) -> RunManifest {
        let outputs = outputs
            .iter()
            .map(|p| {
                p.strip_prefix(dir)
                    .unwrap_or(p)
                    .to_string_lossy()
                    .into_owned()
            })
            .collect();
        RunManifest {
            command: command.to_vec(),
            subcommand: subcommand.into(),
            config,
            seed,
            code_version: code_version().into(),
            started_unix_seconds: self
                .started
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
            wall_clock_seconds: self.clock.elapsed().as_secs_f64(),
            outputs,
        }
    }
}

impl RunManifest {
    /// Writes `manifest.json`, replacing any manifest of an earlier run.
    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::io(&path, e))? + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::io(&path, e))
    }
}
