//! CSV and JSON emission. Numbers carry 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::scenario::{Check, Curve, Outcome, CSV_HEADER};

pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct OutputBundle {
    pub dir: PathBuf,
    /// Curves and the report, in write order.
    pub files: Vec<FileEntry>,
    pub report: Value,
    pub pass: bool,
}

pub fn curve_csv(curve: &Curve) -> String {
    let mut s = String::with_capacity(curve.rows.len() * 9 * 24);
    s.push_str(CSV_HEADER);
    s.push('\n');
    for row in &curve.rows {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            write!(s, "{v:.16e}").unwrap();
        }
        s.push('\n');
    }
    s
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> io::Result<FileEntry> {
    fs::write(dir.join(name), bytes)?;
    Ok(FileEntry {
        path: name.to_string(),
        sha256: sha256_hex(bytes),
    })
}

fn checks_json(checks: &[Check]) -> Value {
    serde_json::to_value(checks).expect("checks serialize")
}

/// Write curves, `report.json` (whose manifest lists the curves) and
/// `manifest.json` (which lists every file, the report included).
pub fn write_bundle(cfg: &ScenarioConfig, outcome: &Outcome, timings: Value) -> io::Result<OutputBundle> {
    fs::create_dir_all(&cfg.out)?;
    let mut files = Vec::new();
    for curve in &outcome.curves {
        files.push(write_file(&cfg.out, &format!("curve_{}.csv", curve.name), curve_csv(curve).as_bytes())?);
    }
    let manifest = |files: &[FileEntry]| {
        json!({
            "files": files,
            "config": cfg,
            "version": env!("CARGO_PKG_VERSION"),
            "timings": timings,
        })
    };
    let pass = outcome.pass();
    let report = json!({
        "scenario": cfg.scenario.name(),
        "pass": pass,
        "checks": checks_json(&outcome.checks),
        "result": outcome.result,
        "manifest": manifest(&files),
    });
    let text = serde_json::to_string_pretty(&report).map_err(io::Error::other)? + "\n";
    files.push(write_file(&cfg.out, REPORT_FILE, text.as_bytes())?);
    let text = serde_json::to_string_pretty(&manifest(&files)).map_err(io::Error::other)? + "\n";
    fs::write(cfg.out.join(MANIFEST_FILE), text)?;
    Ok(OutputBundle {
        dir: cfg.out.clone(),
        files,
        report,
        pass,
    })
}
