//! CSV and JSON result writers.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::OutputFormat;
use crate::{Error, Result};

/// Writes `records` as CSV (header from the field names) or a JSON array.
pub fn write_records_to<T: Serialize, W: Write>(records: &[T], format: OutputFormat, mut out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in records {
                w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, records).map_err(|e| Error::Io(e.to_string()))?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Writes to `path`, or to standard output when no path is given.
pub fn write_records<T: Serialize>(records: &[T], format: OutputFormat, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            write_records_to(records, format, std::io::BufWriter::new(file))
        }
        None => write_records_to(records, format, std::io::stdout().lock()),
    }
}
