use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;
use crate::spec::Format;

/// Serializes rows as CSV (header + one line per row) or as a JSON array.
pub fn render<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row).map_err(|e| CliError::Config(format!("csv encoding: {e}")))?;
            }
            w.into_inner().map_err(|e| CliError::Config(format!("csv encoding: {e}")))
        }
        Format::Json => {
            let mut buf =
                serde_json::to_vec_pretty(rows).map_err(|e| CliError::Config(format!("json encoding: {e}")))?;
            buf.push(b'\n');
            Ok(buf)
        }
    }
}

/// Writes rows to `out`, or to stdout when no path is given.
pub fn write_rows<T: Serialize>(rows: &[T], format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let bytes = render(rows, format)?;
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::io(path, e)),
        None => std::io::stdout().lock().write_all(&bytes).map_err(|e| CliError::io("<stdout>", e)),
    }
}
