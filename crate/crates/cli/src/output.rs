//! CSV and JSON rendering. CSV always carries a header row and `\n` line endings.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::Format;
use crate::CliError;

fn io_error(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

/// Renders `rows` as CSV. An empty table still gets its header from `header`.
pub fn csv_table<T: Serialize>(rows: &[T], header: &[&str]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(!rows.is_empty())
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header).map_err(io_error)?;
    }
    for r in rows {
        w.serialize(r).map_err(io_error)?;
    }
    let bytes = w.into_inner().map_err(io_error)?;
    String::from_utf8(bytes).map_err(io_error)
}

pub fn json_table<T: Serialize>(rows: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(rows).map_err(io_error)?;
    s.push('\n');
    Ok(s)
}

/// One table in the requested format.
pub fn render<T: Serialize>(rows: &[T], header: &[&str], format: Format) -> Result<String, CliError> {
    match format {
        Format::Csv => csv_table(rows, header),
        Format::Json => json_table(&rows),
    }
}

pub fn write_out(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(io_error)?;
            stdout.flush().map_err(io_error)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: Option<f64>,
    }

    #[test]
    fn csv_has_header_and_blank_options() {
        let t = csv_table(&[Row { a: 1, b: Some(0.5) }, Row { a: 2, b: None }], &["a", "b"]).unwrap();
        assert_eq!(t, "a,b\n1,0.5\n2,\n");
        let empty: [Row; 0] = [];
        assert_eq!(csv_table(&empty, &["a", "b"]).unwrap(), "a,b\n");
    }
}
