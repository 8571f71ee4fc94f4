//! File formats: process matrices, sweep tables, sweep configurations and
//! run manifests.
//!
//! Matrix files are plain text: the dimension `d` on the first line, then
//! `d * d` lines `row col re im` with 1-based indices and 17 significant
//! digits, which round-trips every binary64 value exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::bench::{CellSummary, SweepConfig};
use crate::error::{EqptError, Result};
use crate::linalg::{c64, ComplexMatrix};

pub const CSV_HEADER: &str =
    "method,qubits,dimension,width,trials,mean_nrmse,std_nrmse,mean_time_s";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| EqptError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| EqptError::io(path, e))
}

pub fn format_matrix(a: MatRef<'_, c64>) -> String {
    let mut out = String::with_capacity(48 * a.nrows() * a.ncols() + 8);
    let _ = writeln!(out, "{}", a.nrows());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let z = a[(i, j)];
            let _ = writeln!(out, "{} {} {:.16e} {:.16e}", i + 1, j + 1, z.re, z.im);
        }
    }
    out
}

fn parse_error(path: &Path, line: usize, column: usize, message: impl Into<String>) -> EqptError {
    EqptError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

/// Whitespace-separated tokens of a line with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s, &line[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter()
        .map(|(byte, tok)| (line[..byte].chars().count() + 1, tok))
        .collect()
}

/// Parses the matrix format; `path` is only used in error messages.
pub fn parse_matrix(text: &str, path: &Path) -> Result<ComplexMatrix> {
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));
    let (header_line, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| parse_error(path, 1, 1, "empty file, expected the dimension"))?;
    let head = tokens(header);
    let d = match head.as_slice() {
        [(col, tok)] => tok
            .parse::<usize>()
            .ok()
            .filter(|&d| d >= 1)
            .ok_or_else(|| {
                parse_error(
                    path,
                    header_line,
                    *col,
                    format!("invalid dimension '{tok}'"),
                )
            })?,
        [] => unreachable!("blank lines are skipped"),
        [_, (col, _), ..] => {
            return Err(parse_error(
                path,
                header_line,
                *col,
                "expected only the dimension",
            ))
        }
    };

    let mut m = Mat::<c64>::zeros(d, d);
    let mut seen = vec![false; d * d];
    let mut count = 0usize;
    let mut last_line = header_line;
    for (n, line) in lines {
        last_line = n;
        let toks = tokens(line);
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 4 {
            let col = toks.get(4).map_or(line.chars().count() + 1, |t| t.0);
            return Err(parse_error(
                path,
                n,
                col,
                format!("expected 'row col re im', found {} fields", toks.len()),
            ));
        }
        let index = |(col, tok): (usize, &str)| -> Result<usize> {
            tok.parse::<usize>()
                .ok()
                .filter(|&k| (1..=d).contains(&k))
                .ok_or_else(|| {
                    parse_error(path, n, col, format!("index '{tok}' is not in 1..={d}"))
                })
        };
        let value = |(col, tok): (usize, &str)| -> Result<f64> {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(path, n, col, format!("'{tok}' is not a finite number")))
        };
        let (i, j) = (index(toks[0])? - 1, index(toks[1])? - 1);
        let z = c64::new(value(toks[2])?, value(toks[3])?);
        if std::mem::replace(&mut seen[i * d + j], true) {
            return Err(parse_error(
                path,
                n,
                toks[0].0,
                format!("entry ({}, {}) given twice", i + 1, j + 1),
            ));
        }
        m[(i, j)] = z;
        count += 1;
    }
    if count != d * d {
        return Err(parse_error(
            path,
            last_line + 1,
            1,
            format!("expected {} entries, found {count}", d * d),
        ));
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> Result<ComplexMatrix> {
    parse_matrix(&read_text(path)?, path)
}

pub fn write_matrix(path: &Path, a: MatRef<'_, c64>) -> Result<()> {
    write_text(path, &format_matrix(a))
}

fn sig10(x: f64) -> String {
    format!("{x:.9e}")
}

/// Sweep table with [`CSV_HEADER`]. Without timing, `mean_time_s` is left
/// empty so that the table only holds reproducible values.
pub fn format_csv(cells: &[CellSummary], record_timing: bool) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for c in cells {
        let time = if record_timing {
            sig10(c.mean_time_s)
        } else {
            String::new()
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.method.id(),
            c.qubits,
            c.dimension,
            sig10(c.width),
            c.trials,
            sig10(c.mean_nrmse),
            sig10(c.std_nrmse),
            time
        );
    }
    out
}

/// Parses a sweep configuration: flat `key = value` lines (TOML), keys named
/// after the [`SweepConfig`] fields, omitted keys taking their defaults.
pub fn parse_config(text: &str, path: &Path) -> Result<SweepConfig> {
    let config: SweepConfig = toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start).min(text.len());
        let before = &text[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        parse_error(path, line, column, e.message().to_owned())
    })?;
    Ok(config)
}

pub fn read_config(path: &Path) -> Result<SweepConfig> {
    parse_config(&read_text(path)?, path)
}

/// Everything needed to rerun a command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub tool_version: String,
    pub base_seed: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub config: serde_json::Value,
    /// Outcome details that do not belong in the main artifact.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: Vec<String>, base_seed: u64, config: serde_json::Value) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        RunManifest {
            command,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            base_seed,
            timestamp,
            config,
            results: None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| EqptError::io(path, std::io::Error::other(e)))?;
        write_text(path, &(text + "\n"))
    }
}

/// `<artifact>.manifest.json` next to `artifact`.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}
