//! Experiment reports, CSV tables and JSON-lines run manifests.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! table is a pure function of the computed values and reruns compare
//! byte for byte. Timings and checks live in the manifest, never in CSV.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{KamError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A fixed-column table. Every row must have one cell per column.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &'static [&'static str]) -> Table {
        Table {
            name,
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| KamError::Io(std::io::Error::other(e));
        w.write_record(self.columns).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| KamError::Io(std::io::Error::other(e.to_string())))
    }
}

/// Shortest round-trip text of a float.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Check {
    /// Acceptance criterion the property belongs to.
    pub criterion: u8,
    pub property: String,
    pub value: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn range(criterion: u8, property: impl Into<String>, value: f64, lo: Option<f64>, hi: Option<f64>) -> Check {
        let pass = !value.is_nan() && lo.is_none_or(|l| value >= l) && hi.is_none_or(|h| value <= h);
        Check {
            criterion,
            property: property.into(),
            value,
            lo,
            hi,
            pass,
        }
    }

    pub fn at_most(criterion: u8, property: impl Into<String>, value: f64, hi: f64) -> Check {
        Check::range(criterion, property, value, None, Some(hi))
    }

    pub fn at_least(criterion: u8, property: impl Into<String>, value: f64, lo: f64) -> Check {
        Check::range(criterion, property, value, Some(lo), None)
    }

    pub fn within(criterion: u8, property: impl Into<String>, value: f64, lo: f64, hi: f64) -> Check {
        Check::range(criterion, property, value, Some(lo), Some(hi))
    }

    /// A boolean property, recorded as 1 (true) or 0.
    pub fn holds(criterion: u8, property: impl Into<String>, ok: bool) -> Check {
        Check::range(criterion, property, ok as u8 as f64, Some(1.0), None)
    }

    pub fn describe(&self) -> String {
        let bound = match (self.lo, self.hi) {
            (Some(l), Some(h)) => format!("in [{l:e}, {h:e}]"),
            (Some(l), None) => format!(">= {l:e}"),
            (None, Some(h)) => format!("<= {h:e}"),
            (None, None) => String::new(),
        };
        format!("{} = {:e} {bound}", self.property, self.value)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub name: String,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    /// Wall-clock seconds per criterion.
    pub timings: BTreeMap<u8, f64>,
    /// Inputs that were hashed into the manifest, as `(label, text)`.
    pub inputs: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn new(name: &str) -> ExperimentReport {
        ExperimentReport {
            name: name.to_string(),
            tables: Vec::new(),
            checks: Vec::new(),
            timings: BTreeMap::new(),
            inputs: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn checks_for(&self, criterion: u8) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(move |c| c.criterion == criterion)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes `<prefix>.<table>.csv` for each table and returns the paths.
    pub fn write_tables(&self, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for t in &self.tables {
            let path = dir.join(format!("{prefix}.{}.csv", t.name));
            fs::write(&path, t.to_csv()?)?;
            out.push(path);
        }
        Ok(out)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One JSON line per record: a `run` header, then `input`, `output`,
/// `check` and `diagnostic` lines.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifestLine {
    Run {
        command: String,
        /// Arguments that reproduce the run.
        params: Value,
        seed: u64,
        version: String,
        wall_clock_s: f64,
    },
    Input {
        label: String,
        sha256: String,
    },
    Output {
        file: String,
        sha256: String,
    },
    Check(Check),
    Diagnostic(Value),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub lines: Vec<ManifestLine>,
}

impl RunManifest {
    pub fn new(command: &str, params: Value, seed: u64, wall_clock_s: f64) -> RunManifest {
        RunManifest {
            lines: vec![ManifestLine::Run {
                command: command.to_string(),
                params,
                seed,
                version: TOOL_VERSION.to_string(),
                wall_clock_s,
            }],
        }
    }

    pub fn push(&mut self, line: ManifestLine) {
        self.lines.push(line);
    }

    pub fn add_input(&mut self, label: &str, text: &str) {
        self.push(ManifestLine::Input {
            label: label.to_string(),
            sha256: sha256_hex(text.as_bytes()),
        });
    }

    /// Records each file by name (relative to its directory) and digest.
    pub fn add_outputs(&mut self, files: &[PathBuf]) -> Result<()> {
        for f in files {
            let bytes = fs::read(f)?;
            let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            self.push(ManifestLine::Output {
                file: name,
                sha256: sha256_hex(&bytes),
            });
        }
        Ok(())
    }

    pub fn command(&self) -> Option<(&str, &Value, u64)> {
        self.lines.iter().find_map(|l| match l {
            ManifestLine::Run { command, params, seed, .. } => Some((command.as_str(), params, *seed)),
            _ => None,
        })
    }

    pub fn outputs(&self) -> Vec<(&str, &str)> {
        self.lines
            .iter()
            .filter_map(|l| match l {
                ManifestLine::Output { file, sha256 } => Some((file.as_str(), sha256.as_str())),
                _ => None,
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(&serde_json::to_string(l).expect("manifest lines serialize"));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<RunManifest> {
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let l: ManifestLine = serde_json::from_str(raw).map_err(|e| KamError::parse(i + 1, e.to_string()))?;
            lines.push(l);
        }
        let m = RunManifest { lines };
        if m.command().is_none() {
            return Err(KamError::parse(1, "manifest has no run line"));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<RunManifest> {
        RunManifest::parse(&fs::read_to_string(path)?)
    }
}
