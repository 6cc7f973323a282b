//! CSV and JSON emission. CSV output starts with `#` comment lines describing
//! the quantity; writing CSV to a file also writes a `.json` mirror next to it.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::ValueEnum;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

pub struct Sink {
    pub format: Format,
    pub out: Option<PathBuf>,
}

pub fn csv_text<T: Serialize>(header: &[String], rows: &[T]) -> anyhow::Result<String> {
    let mut text = String::new();
    for line in header {
        text.push_str("# ");
        text.push_str(line);
        text.push('\n');
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    text.push_str(&String::from_utf8(w.into_inner()?)?);
    Ok(text)
}

pub fn json_text<T: Serialize + ?Sized>(value: &T) -> anyhow::Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

impl Sink {
    fn write(&self, text: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                Ok(stdout.flush()?)
            }
        }
    }

    /// Emits a table in the selected format.
    pub fn table<T: Serialize>(&self, header: &[String], rows: &[T]) -> anyhow::Result<()> {
        match self.format {
            Format::Json => self.write(&json_text(rows)?),
            Format::Csv => {
                self.write(&csv_text(header, rows)?)?;
                if let Some(path) = &self.out {
                    let mirror = path.with_extension("json");
                    fs::write(&mirror, json_text(rows)?)
                        .with_context(|| format!("writing {}", mirror.display()))?;
                }
                Ok(())
            }
        }
    }

    /// Emits a single structured document, always as JSON.
    pub fn document<T: Serialize>(&self, value: &T) -> anyhow::Result<()> {
        self.write(&json_text(value)?)
    }
}
