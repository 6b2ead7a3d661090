use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use kintrans::evaluation::{Experiment, RunSeeds};
use kintrans::synthgen::SynthConfig;

use crate::CliError;

pub const RUN_MANIFEST: &str = "run-manifest.toml";

/// Output directory guarded against accidental clobbering.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    /// Refuses a non-empty directory unless `overwrite` is set.
    pub fn prepare(root: &Path, overwrite: bool) -> Result<Self, CliError> {
        if root.is_file() {
            return Err(CliError::Usage(format!(
                "output path {} is a file",
                root.display()
            )));
        }
        let occupied = fs::read_dir(root).is_ok_and(|mut d| d.next().is_some());
        if occupied && !overwrite {
            return Err(CliError::Usage(format!(
                "output directory {} is not empty; pass --overwrite to replace its contents",
                root.display()
            )));
        }
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(
        &self,
        rel: impl AsRef<Path>,
        contents: impl AsRef<[u8]>,
    ) -> Result<PathBuf, CliError> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(&p, contents).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    pub fn write_toml<T: Serialize>(
        &self,
        rel: impl AsRef<Path>,
        value: &T,
    ) -> Result<PathBuf, CliError> {
        let text = toml::to_string_pretty(value)
            .map_err(|e| CliError::Usage(format!("serializing {}: {e}", rel.as_ref().display())))?;
        self.write(rel, text)
    }
}

/// Seeds used by one model or one pass.
#[derive(Clone, Debug, Serialize)]
pub struct SeedRecord {
    pub run: String,
    pub model: u64,
    pub train: u64,
    pub infer: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_in: Option<u64>,
}

impl SeedRecord {
    pub fn new(run: impl Into<String>, seeds: &RunSeeds, shift_in: Option<u64>) -> Self {
        Self {
            run: run.into(),
            model: seeds.model,
            train: seeds.train,
            infer: seeds.infer,
            shift_in,
        }
    }
}

/// Everything needed to reproduce a command's outputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub schema: &'static str,
    pub command: String,
    pub version: &'static str,
    pub config: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
    pub seeds: Vec<SeedRecord>,
}

impl RunManifest {
    pub fn new(command: &str, config: &Path, seed: u64) -> Self {
        Self {
            schema: "kintrans-run-manifest/1",
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            config: config.display().to_string(),
            seed,
            data: None,
            experiment: None,
            synth: None,
            seeds: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_non_empty_dir_without_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::prepare(dir.path(), false).unwrap();
        out.write("a/b.txt", "x").unwrap();
        assert!(matches!(
            OutDir::prepare(dir.path(), false),
            Err(CliError::Usage(_))
        ));
        assert!(OutDir::prepare(dir.path(), true).is_ok());
        assert!(OutDir::prepare(&dir.path().join("fresh"), false).is_ok());
    }
}
