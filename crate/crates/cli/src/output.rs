//! Artifact writing: versioned JSON documents and CSV tables with a JSON
//! manifest alongside.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Every JSON artifact: version, command, resolved config, then the payload.
#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    config: &'a RunConfig,
    result: &'a T,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    command: &'a str,
    config: &'a RunConfig,
    files: &'a [String],
}

/// A per-command output directory. Existing files are only replaced with `force`.
pub struct OutputDir<'a> {
    dir: PathBuf,
    command: &'a str,
    config: &'a RunConfig,
    csv_files: Vec<String>,
}

impl<'a> OutputDir<'a> {
    pub fn create(config: &'a RunConfig, command: &'a str, force: bool) -> Result<Self, CliError> {
        let dir = config.output_dir.join(command);
        if dir.exists() && !force && fs::read_dir(&dir).map_err(io_err(&dir))?.next().is_some() {
            return Err(CliError::Usage(format!(
                "{} already has output; pass --force to overwrite",
                dir.display()
            )));
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(OutputDir { dir, command, config, csv_files: Vec::new() })
    }

    pub fn write_json<T: Serialize>(&self, name: &str, result: &T) -> Result<PathBuf, CliError> {
        let doc = Document { schema_version: SCHEMA_VERSION, command: self.command, config: self.config, result };
        self.write_pretty(name, &doc)
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        w.flush().map_err(io_err(&path))?;
        self.csv_files.push(name.to_string());
        Ok(path)
    }

    /// Writes `manifest.json` naming every CSV written so far.
    pub fn finish(self) -> Result<(), CliError> {
        if !self.csv_files.is_empty() {
            let manifest = Manifest {
                schema_version: SCHEMA_VERSION,
                command: self.command,
                config: self.config,
                files: &self.csv_files,
            };
            self.write_pretty("manifest.json", &manifest)?;
        }
        Ok(())
    }

    fn write_pretty<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))?;
        Ok(path)
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<i64> for Cell {
    fn from(i: i64) -> Self {
        Cell::Int(i)
    }
}

impl From<u32> for Cell {
    fn from(i: u32) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Shortest round-trip text; exponent form below 1e−3 in magnitude.
pub fn format_float(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// `println!` that tolerates a closed stdout, e.g. when piped into `head`.
#[macro_export]
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::output::Cell::from($x)),*] };
}
