//! Run manifests: the config that produced a run plus a SHA-256 of every
//! file it wrote.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Gate {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub root_seed: u64,
    pub config: RunConfig,
    pub outputs: Vec<OutputFile>,
    pub gates: Vec<Gate>,
    pub crate_version: String,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// Collects the files written by a run.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Records a file already written below the output directory.
    pub fn register(&mut self, path: &Path) -> Result<()> {
        if !path.starts_with(&self.dir) {
            bail!("{} is outside the output directory", path.display());
        }
        self.files.push(path.to_path_buf());
        Ok(())
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, data).with_context(|| format!("writing {}", path.display()))?;
        self.register(&path)
    }

    pub fn text(&mut self, name: &str, data: &str) -> Result<()> {
        self.bytes(name, data.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.text(name, &serde_json::to_string_pretty(value)?)
    }

    fn hashed(&self) -> Result<Vec<OutputFile>> {
        let mut out: Vec<OutputFile> = self
            .files
            .iter()
            .map(|p| {
                let rel = p.strip_prefix(&self.dir).expect("registered under dir");
                let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
                Ok(OutputFile {
                    path: parts.join("/"),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<_>>()?;
        out.sort_by(|a, b| a.path.cmp(&b.path));
        out.dedup();
        Ok(out)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let data = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&data)))
}

/// Runs one experiment into `out_dir` and writes `manifest.json` there.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunManifest> {
    let mut out = Outputs::new(out_dir)?;
    let gates = crate::experiments::run_experiment(config, &mut out)
        .with_context(|| format!("{} run failed", config.experiment.tag()))?;
    let manifest = RunManifest {
        experiment: config.experiment.tag().to_string(),
        root_seed: config.seed,
        config: config.clone(),
        outputs: out.hashed()?,
        gates,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    std::fs::write(out_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Outcome of re-running a manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct Replay {
    pub manifest: RunManifest,
    /// Outputs whose hash differs from the recorded one (or is missing).
    pub mismatches: Vec<String>,
}

impl Replay {
    pub fn identical(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-runs the config stored in `manifest` into `out_dir` and compares hashes.
pub fn replay(manifest: &RunManifest, out_dir: &Path) -> Result<Replay> {
    let fresh = run(&manifest.config, out_dir)?;
    let mut mismatches: Vec<String> = manifest
        .outputs
        .iter()
        .filter(|o| !fresh.outputs.contains(o))
        .map(|o| o.path.clone())
        .collect();
    mismatches.extend(
        fresh
            .outputs
            .iter()
            .filter(|o| !manifest.outputs.iter().any(|m| m.path == o.path))
            .map(|o| o.path.clone()),
    );
    Ok(Replay {
        manifest: fresh,
        mismatches,
    })
}
