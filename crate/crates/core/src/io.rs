//! CSV and JSON output with a schema marker.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("i/o error on {path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed table: {0}")]
    Malformed(String),
}

fn file_error(path: &Path, source: std::io::Error) -> IoError {
    IoError::File { path: path.display().to_string(), source }
}

/// Write a numeric table: a `# schema=1` comment line, a header row, then rows.
pub fn write_table<W: Write>(out: W, header: &[String], rows: &[Vec<f64>]) -> Result<(), IoError> {
    let mut out = out;
    writeln!(out, "# schema={SCHEMA_VERSION}").map_err(|e| IoError::Malformed(e.to_string()))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|x| format!("{x:.17e}")))?;
    }
    w.flush().map_err(|e| IoError::Malformed(e.to_string()))?;
    Ok(())
}

pub fn write_table_file(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), IoError> {
    let f = File::create(path).map_err(|e| file_error(path, e))?;
    write_table(BufWriter::new(f), header, rows)
}

/// Read a table written by [`write_table`]; comment lines are skipped.
pub fn read_table_file(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| IoError::Malformed(format!("not a number: {s}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != header.len() {
            return Err(IoError::Malformed("row length differs from header".into()));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Pretty JSON with a top-level `"schema": 1` field inserted for objects.
pub fn to_schema_json<T: serde::Serialize>(value: &T) -> Result<String, IoError> {
    let mut v = serde_json::to_value(value)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("schema".into(), serde_json::Value::from(SCHEMA_VERSION));
    }
    Ok(serde_json::to_string_pretty(&v)?)
}

pub fn write_json_file<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = to_schema_json(value)?;
    std::fs::write(path, text + "\n").map_err(|e| file_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip_keeps_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let header = vec!["t".to_string(), "L2".to_string()];
        let rows = vec![vec![0.0, 1.5], vec![0.1, 1.0 / 3.0]];
        write_table_file(&path, &header, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# schema=1\n"));
        let (h, r) = read_table_file(&path).unwrap();
        assert_eq!(h, header);
        assert_eq!(r, rows);
    }

    #[test]
    fn empty_table_has_header_only() {
        let mut buf = Vec::new();
        write_table(&mut buf, &["a".to_string()], &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# schema=1\na\n");
    }
}
