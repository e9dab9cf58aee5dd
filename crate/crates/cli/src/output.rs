use std::io::Write;
use std::path::PathBuf;

use bumpforge::diagnostics::Table;
use serde::Serialize;

use crate::config::Format;
use crate::CliError;

pub struct Emitter {
    pub format: Format,
    pub path: Option<PathBuf>,
}

impl Emitter {
    /// Writes `report` as pretty JSON, or `table` as CSV.
    pub fn emit<T: Serialize>(&self, report: &T, table: &Table) -> Result<(), CliError> {
        let bytes = match self.format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(report).map_err(|e| CliError::Output(e.to_string()))?;
                s.push('\n');
                s.into_bytes()
            }
            Format::Csv => csv_bytes(table)?,
        };
        match &self.path {
            Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Output(format!("{}: {e}", p.display()))),
            None => std::io::stdout()
                .lock()
                .write_all(&bytes)
                .map_err(|e| CliError::Output(e.to_string())),
        }
    }
}

pub fn csv_bytes(table: &Table) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(&table.columns).map_err(err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))
}
