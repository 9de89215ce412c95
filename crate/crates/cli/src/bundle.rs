//! Output directory handling: hashed files, manifest, timing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use frfid_core::seed::{RNG_ALGORITHM, SEED_SPLITTING_RULE};
use frfid_core::FrequencyGrid;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{at, HarnessError};

pub const MANIFEST: &str = "manifest.json";
pub const TIMING: &str = "timing.json";
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub n: usize,
    pub m: usize,
    pub factor: usize,
    pub fs_fast: f64,
    pub fs_slow: f64,
}

impl From<&FrequencyGrid> for GridSummary {
    fn from(g: &FrequencyGrid) -> Self {
        Self {
            n: g.n(),
            m: g.m(),
            factor: g.factor(),
            fs_fast: g.fs_fast(),
            fs_slow: g.fs_slow(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Stats {
    /// `None` when no value is finite.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        let median = median(&v)?;
        Some(Self {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            median,
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Median of the finite entries; `None` for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Provenance record written as `manifest.json`; its schema is described in
/// the README.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub rng_algorithm: String,
    pub seed_rule: String,
    pub grid: GridSummary,
    pub data_source: String,
    pub noise_sigma: Option<f64>,
    pub methods: Vec<serde_json::Value>,
    /// SHA-256 of every other file in the bundle except the timing file.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config_toml: &str, master_seed: u64, grid: &FrequencyGrid) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256: sha256_hex(config_toml.as_bytes()),
            master_seed,
            seeds: BTreeMap::new(),
            rng_algorithm: RNG_ALGORITHM.to_string(),
            seed_rule: SEED_SPLITTING_RULE.to_string(),
            grid: grid.into(),
            data_source: "simulated".to_string(),
            noise_sigma: None,
            methods: Vec::new(),
            files: BTreeMap::new(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Wall-clock per stage. Kept out of the manifest so that reruns stay
/// byte-identical.
#[derive(Debug, Serialize)]
pub struct Timing {
    threads: usize,
    stages: Vec<(String, f64)>,
    #[serde(skip)]
    last: Option<Instant>,
}

impl Default for Timing {
    fn default() -> Self {
        Self::new()
    }
}

impl Timing {
    pub fn new() -> Self {
        Self {
            threads: rayon::current_num_threads(),
            stages: Vec::new(),
            last: Some(Instant::now()),
        }
    }

    /// Close the current stage under `name` and start the next one.
    pub fn lap(&mut self, name: &str) {
        let now = Instant::now();
        let start = self.last.replace(now).unwrap_or(now);
        self.stages.push((name.to_string(), (now - start).as_secs_f64()));
    }
}

/// An output directory being filled.
#[derive(Debug)]
pub struct Bundle {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self, HarnessError> {
        fs::create_dir_all(dir).map_err(at("output"))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), HarnessError> {
        fs::write(self.dir.join(name), bytes).map_err(at("output"))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Render into memory with `f`, then write and hash.
    pub fn write_with<E: std::fmt::Display>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> Result<(), E>,
    ) -> Result<(), HarnessError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(at("output"))?;
        self.write(name, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), HarnessError> {
        let mut text = serde_json::to_string_pretty(value).map_err(at("output"))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Write the manifest listing every file written so far, then the timing.
    pub fn finish(self, mut manifest: Manifest, timing: &Timing) -> Result<Manifest, HarnessError> {
        manifest.files = self.files;
        let mut text = serde_json::to_string_pretty(&manifest).map_err(at("output"))?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST), text).map_err(at("output"))?;
        let timing = serde_json::to_string_pretty(timing).map_err(at("output"))?;
        fs::write(self.dir.join(TIMING), timing + "\n").map_err(at("output"))?;
        Ok(manifest)
    }
}
