//! JSON report envelopes, CSV sidecars and exit-code mapping.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Serialize, Serializer};

use crate::inputs::UsageError;
use crate::Cli;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    tool_version: &'static str,
    config: &'a Cli,
    result: &'a T,
}

pub fn to_json<T: Serialize>(cli: &Cli, result: &T) -> Result<String> {
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        config: cli,
        result,
    };
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    Ok(text)
}

pub fn write_json<T: Serialize>(path: &Path, cli: &Cli, result: &T) -> Result<()> {
    write_bytes(path, to_json(cli, result)?.as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// `grid.csv` -> `grid.run.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("run.json")
}

pub fn display<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(value)
}

/// 1 for bad input or invocation, 2 for everything else.
pub fn exit_code(error: &anyhow::Error) -> u8 {
    for cause in error.chain() {
        if let Some(e) = cause.downcast_ref::<anlgmap_core::Error>() {
            return if e.is_input_error() { 1 } else { 2 };
        }
        if cause.is::<UsageError>() || cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return 1;
        }
    }
    2
}
