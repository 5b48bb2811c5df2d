//! Reports: `key = value` records plus CSV tables.
//!
//! A report named `stem` is written as `stem.txt` and one `stem-<table>.csv`
//! per table. Contents depend only on the configuration, so identical runs
//! produce identical bytes.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub records: Vec<(String, String)>,
    pub tables: Vec<Table>,
}

/// Shortest round-trip float notation.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

impl Report {
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.records.push((key.to_string(), value.to_string()));
    }

    pub fn set_num(&mut self, key: &str, value: f64) {
        self.set(key, num(value));
    }

    pub fn render(&self) -> String {
        self.records.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let main = dir.join(format!("{stem}.txt"));
        std::fs::write(&main, self.render()).map_err(|e| CliError::io(&main, e))?;
        let mut written = vec![main];
        for table in &self.tables {
            let path = dir.join(format!("{stem}-{}.csv", table.name));
            let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let csv_err = |e: csv::Error| CliError::Usage(format!("{}: {e}", path.display()));
            w.write_record(&table.header).map_err(csv_err)?;
            for row in &table.rows {
                w.write_record(row).map_err(csv_err)?;
            }
            w.flush().map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}
