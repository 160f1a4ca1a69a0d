//! Run manifests: every subcommand records its inputs, outputs (with content
//! digests) and per-phase wall-clock timings. Timings live only in the
//! manifest, so primary artifacts stay byte-identical across reruns.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::CliError;

/// FNV-1a 64-bit digest, hex-encoded. Stable and dependency-free; good
/// enough to detect artifact drift between runs.
pub fn digest_bytes(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

#[derive(Serialize)]
struct Artifact {
    path: PathBuf,
    digest: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    subcommand: &'static str,
    version: &'static str,
    seed: u64,
    config_file: Option<PathBuf>,
    inputs: Vec<PathBuf>,
    outputs: Vec<Artifact>,
    timings_ms: BTreeMap<String, u128>,
    #[serde(skip)]
    started: Instant,
    #[serde(skip)]
    phase_started: Instant,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, seed: u64, config_file: Option<PathBuf>) -> Self {
        let now = Instant::now();
        RunManifest {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config_file,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
            started: now,
            phase_started: now,
        }
    }

    pub fn record_input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Close the current phase under `name` and start the next one.
    pub fn phase(&mut self, name: &str) {
        let now = Instant::now();
        self.timings_ms
            .insert(name.to_string(), now.duration_since(self.phase_started).as_millis());
        self.phase_started = now;
    }

    /// Write an output artifact and record its digest.
    pub fn write_output(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(path, bytes)
            .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
        self.outputs.push(Artifact { path: path.to_path_buf(), digest: digest_bytes(bytes) });
        Ok(())
    }

    /// Finish the run: write `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<(), CliError> {
        self.timings_ms
            .insert("total".to_string(), self.started.elapsed().as_millis());
        let json = serde_json::to_string_pretty(&self)
            .map_err(|e| CliError::io(format!("manifest serialization: {e}")))?;
        let path = dir.join("manifest.json");
        fs::write(&path, json.as_bytes())
            .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))?;
        Ok(())
    }
}
