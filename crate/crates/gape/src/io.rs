//! JSON and CSV files. Every file written here embeds the configuration that
//! produced it: JSON files carry it as a field, CSV files start with a
//! `# config: <json>` line.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use gape_core::{GeneratorConfig, RunRecord, TabularMdp};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, io_err, HarnessError, Result};

pub const CONFIG_PREFIX: &str = "# config: ";

/// An MDP together with the generator settings that produced it, if any.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    pub mdp: TabularMdp,
}

/// One planning run with its resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFile<C> {
    pub config: C,
    pub record: RunRecord,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| HarnessError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(input_err(path))?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.to_path_buf(), source })
}

pub fn write_mdp(path: &Path, file: &MdpFile) -> Result<()> {
    write_json(path, file)
}

pub fn read_mdp(path: &Path) -> Result<MdpFile> {
    read_json(path)
}

/// Writes `rows` as CSV below a config echo line.
pub fn write_csv<C: Serialize, R: Serialize>(path: &Path, config: &C, rows: &[R]) -> Result<()> {
    let echo = serde_json::to_string(config)
        .map_err(|source| HarnessError::Json { path: path.to_path_buf(), source })?;
    let mut file = File::create(path).map_err(io_err(path))?;
    writeln!(file, "{CONFIG_PREFIX}{echo}").map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a file written by [`write_csv`], returning the config echo and rows.
pub fn read_csv<R: DeserializeOwned>(path: &Path) -> Result<(String, Vec<R>)> {
    let file = File::open(path).map_err(input_err(path))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(input_err(path))?;
    let echo = first
        .trim_end()
        .strip_prefix(CONFIG_PREFIX)
        .ok_or_else(|| HarnessError::Config(format!("{}: missing config line", path.display())))?
        .to_string();
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        rows.push(row?);
    }
    Ok((echo, rows))
}
