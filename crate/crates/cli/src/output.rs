//! Artifact writers. Every file starts with the tool version, the config
//! fingerprint and the unit convention.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{CliError, RunConfig, Task, TOOL, VERSION};

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub task: Task,
    pub fingerprint: String,
    pub units: String,
    pub config: RunConfig,
}

impl Header {
    pub fn new(config: &RunConfig, task: Task) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            task,
            fingerprint: config.fingerprint(),
            units: format!("hbar = c = 1; m = {} in the energy unit; lengths in the inverse energy unit", config.mass),
            config: config.clone(),
        }
    }
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Comma-separated table preceded by `#` metadata lines.
pub fn write_csv(dir: &Path, name: &str, header: &Header, columns: &[String], rows: &[Vec<f64>]) -> Result<PathBuf, CliError> {
    let mut s = String::new();
    let config = serde_json::to_string(&header.config).expect("config serializes");
    writeln!(s, "# {} {}", header.tool, header.version).unwrap();
    writeln!(s, "# task: {}", header.task.name()).unwrap();
    writeln!(s, "# fingerprint: sha256:{}", header.fingerprint).unwrap();
    writeln!(s, "# units: {}", header.units).unwrap();
    writeln!(s, "# config: {config}").unwrap();
    writeln!(s, "{}", columns.join(",")).unwrap();
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        writeln!(s, "{}", cells.join(",")).unwrap();
    }
    write_file(dir.join(name), &s)
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    #[serde(flatten)]
    header: &'a Header,
    result: &'a T,
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, header: &Header, result: &T) -> Result<PathBuf, CliError> {
    let mut s = serde_json::to_string_pretty(&Document { header, result }).expect("result serializes");
    s.push('\n');
    write_file(dir.join(name), &s)
}
