//! Content-addressed stage bookkeeping.
//!
//! Every stage writes `manifests/<stage>.toml` listing the SHA-256 of each
//! input and output. A later stage asks for an artifact through
//! [`Workdir::require`], which fails when the artifact is missing, was edited
//! after its producer ran, or was produced from inputs that have since
//! changed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use topicchoice::Error;

use crate::CliError;

const MANIFEST_DIR: &str = "manifests";
/// Input-name prefix for files outside the work directory. Those are hashed
/// but not re-verified.
pub const EXTERNAL: &str = "external:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    /// Hash of the stage name, its input hashes and its configuration.
    pub key: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&data))
}

pub struct Workdir {
    root: PathBuf,
}

impl Workdir {
    pub fn create(root: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(root.join(MANIFEST_DIR)).map_err(|e| Error::io(&root, e))?;
        Ok(Workdir { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, data: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, data).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    fn manifest_path(&self, stage: &str) -> PathBuf {
        self.root.join(MANIFEST_DIR).join(format!("{stage}.toml"))
    }

    pub fn manifest(&self, stage: &str) -> Result<Option<Manifest>, CliError> {
        let path = self.manifest_path(stage);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(Some(manifest))
    }

    /// Path and hash of `name`, which `stage` must have produced from inputs
    /// that are still current.
    pub fn require(&self, name: &str, stage: &str) -> Result<(PathBuf, String), CliError> {
        let path = self.path(name);
        if !path.exists() {
            return Err(CliError::Artifact(format!(
                "missing artifact `{name}` in {}; run `topicchoice {stage}` first",
                self.root.display()
            )));
        }
        let manifest = self.manifest(stage)?.ok_or_else(|| {
            CliError::Artifact(format!(
                "artifact `{name}` has no `{stage}` manifest; run `topicchoice {stage}` first"
            ))
        })?;
        let hash = sha256_file(&path)?;
        if manifest.outputs.get(name) != Some(&hash) {
            return Err(CliError::Artifact(format!(
                "artifact `{name}` does not match what `{stage}` last wrote; rerun `topicchoice {stage}`"
            )));
        }
        for (input, recorded) in &manifest.inputs {
            if input.starts_with(EXTERNAL) {
                continue;
            }
            let current = self.path(input);
            if !current.exists() || &sha256_file(&current)? != recorded {
                return Err(CliError::Artifact(format!(
                    "artifact `{name}` is stale: `{input}` changed after `{stage}` ran; rerun `topicchoice {stage}`"
                )));
            }
        }
        Ok((path, hash))
    }

    /// Writes the manifest of `stage`. `inputs` are `(name, hash)` pairs;
    /// `outputs` are work-directory file names, hashed here.
    pub fn record(&self, stage: &str, inputs: &[(String, String)], config: &str, outputs: &[&str]) -> Result<(), CliError> {
        let inputs: BTreeMap<String, String> = inputs.iter().cloned().collect();
        let mut keyed = format!("{stage}\n");
        for (name, hash) in &inputs {
            keyed.push_str(&format!("{name}={hash}\n"));
        }
        keyed.push_str(config);
        let mut out = BTreeMap::new();
        for name in outputs {
            out.insert(name.to_string(), sha256_file(&self.path(name))?);
        }
        let manifest = Manifest {
            stage: stage.to_string(),
            key: sha256_hex(keyed.as_bytes()),
            inputs,
            outputs: out,
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        let path = self.manifest_path(stage);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}
