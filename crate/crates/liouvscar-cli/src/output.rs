//! Headered CSV and JSON files. All writes go through one [`Emitter`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

/// Version stamped into every output file.
pub const SCHEMA_VERSION: u32 = 1;

pub struct Emitter {
    dir: PathBuf,
    config_sha256: String,
    written: Vec<String>,
}

/// Shortest round-trip form; NaN and infinities are spelled out.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Empty cell for a gap.
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// File-name form of a block tag such as `m4,4|p+|x+`.
pub fn file_tag(tag: &str) -> String {
    tag.chars().map(|c| if c.is_ascii_alphanumeric() || c == '+' || c == '-' { c } else { '_' }).collect()
}

impl Emitter {
    pub fn new(dir: &Path, config_sha256: String) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), config_sha256, written: Vec::new() })
    }

    pub fn header(&self, schema: &str) -> Value {
        json!({
            "program": "liouvscar",
            "version": liouvscar::VERSION,
            "schema": schema,
            "schema_version": SCHEMA_VERSION,
            "config_sha256": self.config_sha256,
        })
    }

    /// `columns` pairs each name with its type (`f64`, `int`, `str`, `bool`).
    pub fn csv(&mut self, name: &str, schema: &str, columns: &[(&str, &str)], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut out = String::new();
        let _ = writeln!(out, "# liouvscar {}", liouvscar::VERSION);
        let _ = writeln!(out, "# schema: {schema} v{SCHEMA_VERSION}");
        let _ = writeln!(out, "# config_sha256: {}", self.config_sha256);
        let typed: Vec<String> = columns.iter().map(|(n, t)| format!("{n}:{t}")).collect();
        let _ = writeln!(out, "# columns: {}", typed.join(" "));
        let mut w = csv::Writer::from_writer(out.into_bytes());
        w.write_record(columns.iter().map(|c| c.0))?;
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        self.write(name, String::from_utf8(bytes).expect("utf-8 cells"))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, schema: &str, body: &T) -> Result<(), CliError> {
        let mut value = json!({ "header": self.header(schema) });
        value["data"] = serde_json::to_value(body)?;
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        self.write(name, text)
    }

    fn write(&mut self, name: &str, text: String) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), text)?;
        log::info!("wrote {name}");
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}
