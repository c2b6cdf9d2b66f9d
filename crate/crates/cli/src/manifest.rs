use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce a command's outputs.
#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    /// Input role to SHA-256 of the file contents.
    pub inputs: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
}

impl<'a, C: Serialize> Manifest<'a, C> {
    pub fn new(command: &'a str, config: &'a C) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            inputs: BTreeMap::new(),
            seeds: Vec::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> CliResult<String> {
        let digest = sha256_file(path)?;
        self.inputs.insert(role.to_string(), digest.clone());
        Ok(digest)
    }

    /// Creates `out` and writes the manifest into it.
    pub fn write(&self, out: &Path) -> CliResult<()> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_json(&out.join(MANIFEST_FILE), self)
    }
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
