use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const RUN_MANIFEST: &str = "run.json";

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
    /// sha256 of every input; directories hash their files in name order.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn files_under(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for e in fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_dir() {
            files_under(&p, out)?;
        } else if p.file_name().is_none_or(|n| n != RUN_MANIFEST) {
            out.push(p);
        }
    }
    Ok(())
}

pub fn hash_path(path: &Path) -> std::io::Result<String> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        files_under(path, &mut files)?;
        files.sort();
        for f in files {
            h.update(f.strip_prefix(path).unwrap().to_string_lossy().as_bytes());
            h.update([0]);
            h.update(fs::read(&f)?);
        }
    } else {
        h.update(fs::read(path)?);
    }
    Ok(hex(&h.finalize()))
}

pub fn write(out_dir: &Path, command: &str, cfg: &RunConfig, inputs: &[&Path], outputs: &[&str]) -> Result<(), CliError> {
    let inputs = inputs
        .iter()
        .map(|p| Ok((p.display().to_string(), hash_path(p).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?)))
        .collect::<Result<_, CliError>>()?;
    let m = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg,
        inputs,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(out_dir.join(RUN_MANIFEST), text + "\n").map_err(|e| CliError::Runtime(e.to_string()))
}
