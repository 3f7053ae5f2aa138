use std::collections::BTreeSet;
use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use tierblock::config::{ExperimentConfig, Provenance};
use tierblock::ingest::read_table;
use tierblock::workload::TimedWorkload;
use tierblock::{Error, Table};

use crate::error::{CliError, CliResult};
use crate::ConfigArgs;

pub fn load_config(args: &ConfigArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| missing_or_data(p, e))?;
            ExperimentConfig::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    let mut seen = BTreeSet::new();
    for s in &args.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{s}`")))?;
        let k = k.trim();
        if !seen.insert(k.to_string()) {
            return Err(CliError::Usage(format!("--set {k} given more than once")));
        }
        cfg.set(k, v.trim()).map_err(|e| CliError::Usage(format!("--set {s}: {e}")))?;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

pub fn provenance(cfg: &ExperimentConfig, command: &str, seeds: &[u64]) -> Provenance {
    let digest = Sha256::digest(cfg.to_text().as_bytes());
    Provenance {
        tool: "tierblock".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        seeds: seeds.to_vec(),
    }
}

/// A missing input is a usage problem; anything else while reading is a
/// data problem.
fn missing_or_data(path: &Path, e: std::io::Error) -> CliError {
    if e.kind() == ErrorKind::NotFound {
        CliError::Usage(format!("{}: no such file", path.display()))
    } else {
        CliError::Input {
            path: path.into(),
            source: Error::Io(e),
        }
    }
}

fn require(path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{}: no such file", path.display())))
    }
}

pub fn load_table(path: &Path) -> CliResult<Table> {
    require(path)?;
    read_table(path).map_err(CliError::input(path))
}

pub fn load_workload(path: &Path) -> CliResult<TimedWorkload> {
    require(path)?;
    TimedWorkload::read(path).map_err(CliError::input(path))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(CliError::output(dir))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(CliError::output(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// `--seed` if given, else the first configured seed.
pub fn pick_seed(cfg: &ExperimentConfig, seed: Option<u64>) -> u64 {
    seed.unwrap_or(cfg.seeds[0])
}
