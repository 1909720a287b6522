//! Run manifests: everything needed to reproduce a run, and nothing that
//! varies between identical runs (no paths, no timestamps).

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Paths, RunConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the normalized config with paths removed.
    pub config_sha256: String,
    pub versions: BTreeMap<String, String>,
    pub config: RunConfig,
    /// SHA-256 of every file in the dataset directory.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every artifact written, relative to the output directory.
    pub outputs: BTreeMap<String, String>,
}

fn sha256_file(path: &Path) -> fogsense::Result<String> {
    let io = |e| fogsense::Error::Io { path: path.into(), source: e };
    let mut file = std::fs::File::open(path).map_err(io)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = file.read(&mut buf).map_err(io)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Hashes of the regular files directly inside `dir`, manifest excluded.
fn hash_dir(dir: &Path) -> fogsense::Result<BTreeMap<String, String>> {
    let io = |e| fogsense::Error::Io { path: dir.into(), source: e };
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let entry = entry.map_err(io)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == MANIFEST_FILE || !entry.file_type().map_err(io)?.is_file() {
            continue;
        }
        out.insert(name, sha256_file(&entry.path())?);
    }
    Ok(out)
}

impl Manifest {
    /// `outputs` lists artifacts relative to `out`; when empty, every file in
    /// `out` is recorded.
    pub fn build(
        command: &str,
        cfg: &RunConfig,
        data: Option<&Path>,
        out: &Path,
        outputs: &[String],
    ) -> fogsense::Result<Self> {
        let config = RunConfig { paths: Paths::default(), ..cfg.clone() };
        let config_sha256 = hex::encode(Sha256::digest(config.to_toml().as_bytes()));
        let versions = BTreeMap::from([
            ("fogsense-core".to_string(), fogsense::VERSION.to_string()),
            ("fogsense-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("model-format".to_string(), fogsense::model::MODEL_FORMAT_VERSION.to_string()),
        ]);
        let inputs = match data {
            Some(dir) => hash_dir(dir)?,
            None => BTreeMap::new(),
        };
        let outputs = if outputs.is_empty() {
            hash_dir(out)?
        } else {
            outputs.iter().map(|rel| Ok((rel.clone(), sha256_file(&out.join(rel))?))).collect::<fogsense::Result<_>>()?
        };
        Ok(Manifest { command: command.into(), seed: cfg.seed, config_sha256, versions, config, inputs, outputs })
    }

    pub fn write(&self, dir: &Path) -> fogsense::Result<()> {
        fogsense::signalio::write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn read(dir: &Path) -> fogsense::Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| fogsense::Error::Io { path: path.clone(), source: e })?;
        Ok(serde_json::from_str(&text)?)
    }
}
