//! CSV artifacts and the run manifest.
//!
//! Every file is assembled in memory first, so its hash is taken from the
//! exact bytes written and reruns can be compared byte for byte. Floats
//! are rendered with the standard shortest round-trip formatting, which
//! is platform independent.

use std::fmt::Display;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

/// One finished output file.
pub struct Artifact {
    pub name: &'static str,
    pub bytes: Vec<u8>,
    /// Data rows (header excluded), for the run summary.
    pub rows: usize,
}

impl Artifact {
    pub fn sha256_hex(&self) -> String {
        sha256_hex(&self.bytes)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// CSV under construction with a fixed column count.
pub struct CsvBuilder {
    name: &'static str,
    writer: csv::Writer<Vec<u8>>,
    columns: usize,
    rows: usize,
}

impl CsvBuilder {
    pub fn new(name: &'static str, header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).context("writing csv header")?;
        Ok(Self { name, writer, columns: header.len(), rows: 0 })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        assert_eq!(fields.len(), self.columns, "{}: row width mismatch", self.name);
        self.writer.write_record(fields).context("writing csv row")?;
        self.rows += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<Artifact> {
        let bytes = self.writer.into_inner().context("flushing csv")?;
        Ok(Artifact { name: self.name, bytes, rows: self.rows })
    }
}

/// Shortest round-trip rendering for any field type used in reports.
pub fn field(value: impl Display) -> String {
    value.to_string()
}

/// Builds `manifest.csv`: run metadata plus one content hash per output
/// file, file rows sorted by name. The manifest cannot list itself.
pub fn manifest(
    experiment: &str,
    seed: u64,
    config_sha256: &str,
    core_version: &str,
    cli_version: &str,
    artifacts: &[Artifact],
) -> Result<Artifact> {
    let mut csv = CsvBuilder::new("manifest.csv", &["kind", "key", "value"])?;
    csv.row(&[field("meta"), field("format_version"), field(1)])?;
    csv.row(&[field("meta"), field("cli_version"), field(cli_version)])?;
    csv.row(&[field("meta"), field("core_version"), field(core_version)])?;
    csv.row(&[field("meta"), field("experiment"), field(experiment)])?;
    csv.row(&[field("meta"), field("seed"), field(seed)])?;
    csv.row(&[field("meta"), field("config_sha256"), field(config_sha256)])?;
    let mut files: Vec<(&str, String)> =
        artifacts.iter().map(|a| (a.name, a.sha256_hex())).collect();
    files.sort_by_key(|(name, _)| *name);
    for (name, hash) in files {
        csv.row(&[field("file"), field(name), field(hash)])?;
    }
    csv.finish()
}

/// One named internal invariant check; failures turn into a nonzero exit.
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &'static str, pass: bool, detail: impl Into<String>) -> Self {
        Self { name, pass, detail: detail.into() }
    }
}
