//! Output files, run records and checksum verification.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::fmt_f64;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// CSV text with a leading comment line carrying the schema and the config
/// fingerprint, then the header row.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(kind: &str, fingerprint: &str, header: &[&str]) -> Self {
        let mut text = format!(
            "# quench {} schema={} config_sha256={}\n",
            kind, SCHEMA_VERSION, fingerprint
        );
        text.push_str(&header.join(","));
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

pub fn f(x: f64) -> String {
    fmt_f64(x)
}

#[derive(Debug, Clone)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Everything one command produced, before anything touches the disk.
#[derive(Debug)]
pub struct CommandOutput {
    pub command: &'static str,
    /// Prefix of the run-record file name.
    pub stem: String,
    pub files: Vec<OutputFile>,
    pub record: Value,
    pub summary: String,
    /// Reported after the files are written.
    pub failure: Option<CliError>,
}

impl CommandOutput {
    pub fn record_name(&self) -> String {
        format!("{}__{}__record.json", self.stem, self.command)
    }
}

#[derive(Debug, Serialize)]
struct Checksum<'a> {
    file: &'a str,
    sha256: String,
    bytes: usize,
}

fn full_record(out: &CommandOutput, config_text: Option<&str>, fingerprint: Option<&str>) -> Value {
    let outputs: Vec<Checksum> = out
        .files
        .iter()
        .map(|o| Checksum {
            file: &o.name,
            sha256: sha256_hex(&o.bytes),
            bytes: o.bytes.len(),
        })
        .collect();
    json!({
        "tool": "quench",
        "version": env!("CARGO_PKG_VERSION"),
        "schema": SCHEMA_VERSION,
        "command": out.command,
        "config": config_text,
        "config_sha256": fingerprint,
        "artifacts": out.record,
        "outputs": outputs,
    })
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes the files and the run record. Returns the paths written.
pub fn emit(
    out: &CommandOutput,
    dir: &Path,
    config_text: Option<&str>,
    fingerprint: Option<&str>,
) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    for o in &out.files {
        let p = dir.join(&o.name);
        write(&p, &o.bytes)?;
        written.push(p);
    }
    let record = full_record(out, config_text, fingerprint);
    let mut text = serde_json::to_string_pretty(&record).expect("record serializes");
    text.push('\n');
    let p = dir.join(out.record_name());
    write(&p, text.as_bytes())?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub file: String,
    pub reason: String,
}

/// Compares freshly derived outputs with the checksums of an existing run
/// record and with the files on disk. Nothing is written.
pub fn verify(out: &CommandOutput, dir: &Path) -> CliResult<Vec<Mismatch>> {
    let rp = dir.join(out.record_name());
    let text = std::fs::read_to_string(&rp).map_err(|e| CliError::io(&rp, e))?;
    let record: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: unreadable run record: {}", rp.display(), e)))?;
    let recorded: Vec<(String, String)> = record["outputs"]
        .as_array()
        .map(|a| {
            a.iter()
                .filter_map(|o| Some((o["file"].as_str()?.to_string(), o["sha256"].as_str()?.to_string())))
                .collect()
        })
        .unwrap_or_default();
    let mut bad = Vec::new();
    for o in &out.files {
        let fresh = sha256_hex(&o.bytes);
        match recorded.iter().find(|(n, _)| *n == o.name) {
            None => bad.push(Mismatch {
                file: o.name.clone(),
                reason: "not in run record".into(),
            }),
            Some((_, h)) if *h != fresh => bad.push(Mismatch {
                file: o.name.clone(),
                reason: "re-derived checksum differs from run record".into(),
            }),
            Some(_) => {}
        }
        match std::fs::read(dir.join(&o.name)) {
            Ok(b) if sha256_hex(&b) == fresh => {}
            Ok(_) => bad.push(Mismatch {
                file: o.name.clone(),
                reason: "file on disk differs from re-derived output".into(),
            }),
            Err(_) => bad.push(Mismatch {
                file: o.name.clone(),
                reason: "missing on disk".into(),
            }),
        }
    }
    for (n, _) in &recorded {
        if !out.files.iter().any(|o| &o.name == n) {
            bad.push(Mismatch {
                file: n.clone(),
                reason: "recorded but not re-derived".into(),
            });
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CommandOutput {
        let mut csv = Csv::new("test", "abc", &["a", "b"]);
        csv.row(&[f(1.0), f(0.5)]);
        CommandOutput {
            command: "test",
            stem: "s".into(),
            files: vec![OutputFile {
                name: "s.csv".into(),
                bytes: csv.into_bytes(),
            }],
            record: json!({}),
            summary: String::new(),
            failure: None,
        }
    }

    #[test]
    fn csv_layout() {
        let o = sample();
        let text = String::from_utf8(o.files[0].bytes.clone()).unwrap();
        assert_eq!(text, "# quench test schema=1 config_sha256=abc\na,b\n1,0.5\n");
    }

    #[test]
    fn verify_detects_tampering() {
        let dir = std::env::temp_dir().join(format!("quench-verify-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let o = sample();
        emit(&o, &dir, None, None).unwrap();
        assert!(verify(&o, &dir).unwrap().is_empty());
        std::fs::write(dir.join("s.csv"), b"changed").unwrap();
        let bad = verify(&o, &dir).unwrap();
        assert_eq!(bad.len(), 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
