//! Artifact writing: every output carries a `_meta` provenance header.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use herman_core::text::META_KEY;
use herman_core::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Settings;
use crate::error::CliError;

/// Tool version, config hash and seed of the run that wrote an artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool_version: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(settings: &Settings, seed: u64) -> Self {
        Self { tool_version: env!("CARGO_PKG_VERSION"), config_hash: settings.hash(), seed }
    }

    pub fn header(&self) -> Value {
        json!({ META_KEY: self })
    }
}

pub fn open_input(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))
}

/// Fails early when an output could not be created.
pub fn check_output(path: &Path) -> Result<(), CliError> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(CliError::Config(format!("output directory {} does not exist", parent.display())));
    }
    if path.is_dir() {
        return Err(CliError::Config(format!("output {} is a directory", path.display())));
    }
    Ok(())
}

pub fn check_input(path: &Path) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::data(format!("input {} does not exist", path.display())));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", path.display())))
}

pub fn write_jsonl<T: Serialize>(path: &Path, meta: &Provenance, items: &[T]) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, &meta.header()).map_err(Error::from)?;
    w.write_all(b"\n").map_err(Error::from)?;
    herman_core::text::write_jsonl(&mut w, items)?;
    w.flush().map_err(Error::from)?;
    Ok(())
}

/// Writes a JSON object with `_meta` as its first key.
pub fn write_json(path: &Path, meta: &Provenance, body: Value) -> Result<(), CliError> {
    let mut obj = serde_json::Map::new();
    obj.insert(META_KEY.to_string(), json!(meta));
    if let Value::Object(fields) = body {
        obj.extend(fields);
    }
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &Value::Object(obj)).map_err(Error::from)?;
    w.write_all(b"\n").map_err(Error::from)?;
    w.flush().map_err(Error::from)?;
    Ok(())
}

/// Path of the effective-config dump written next to `output`.
pub fn config_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".config");
    output.with_file_name(name)
}

pub fn dump_config(output: &Path, settings: &Settings) -> Result<(), CliError> {
    let path = config_path(output);
    fs::write(&path, settings.render()).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}
