use std::fs::File;
use std::io::Write;
use std::path::Path;

use forestmmd::Dataset;

use crate::error::{CliError, CliResult};

/// Reads a headed, comma-separated numeric table and splits off `target`.
pub fn read_dataset(path: &Path, target: &str) -> CliResult<Dataset> {
    let data_err = |message: String| CliError::Data {
        path: path.to_path_buf(),
        message,
    };
    let file = File::open(path).map_err(|e| data_err(e.to_string()))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| data_err(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(data_err("empty file: a header row is required".into()));
    }
    let target_col = header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| data_err(format!("target column `{target}` not found")))?;
    if header.len() < 2 {
        return Err(data_err("no feature columns besides the target".into()));
    }

    let p = header.len() - 1;
    let mut features = Vec::new();
    let mut response = Vec::new();
    for (r, record) in reader.records().enumerate() {
        // data rows are numbered from 1, after the header
        let row = r + 1;
        let record = record.map_err(|e| data_err(format!("row {row}: {e}")))?;
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                data_err(format!(
                    "row {row}, column {} (`{}`): `{cell}` is not a number",
                    c + 1,
                    header[c]
                ))
            })?;
            if !value.is_finite() {
                return Err(data_err(format!(
                    "row {row}, column {} (`{}`): non-finite value",
                    c + 1,
                    header[c]
                )));
            }
            if c == target_col {
                response.push(value);
            } else {
                features.push(value);
            }
        }
    }
    if response.is_empty() {
        return Err(data_err("no data rows".into()));
    }
    debug_assert_eq!(features.len(), response.len() * p);
    let names = header
        .into_iter()
        .enumerate()
        .filter(|&(c, _)| c != target_col)
        .map(|(_, h)| h)
        .collect();
    Dataset::new(features, names, response).map_err(|e| data_err(e.to_string()))
}

/// Writes features plus a trailing `target` column.
pub fn write_dataset(path: &Path, data: &Dataset) -> CliResult<()> {
    let write_err = |source: std::io::Error| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(write_err)?;
    let mut writer = csv::Writer::from_writer(file);
    let header = data.names().iter().map(String::as_str).chain(["target"]);
    writer
        .write_record(header)
        .map_err(|e| write_err(e.into()))?;
    let mut line = Vec::with_capacity(data.n_features() + 1);
    for i in 0..data.n_rows() {
        line.clear();
        line.extend(data.row(i).iter().map(f64::to_string));
        line.push(data.response()[i].to_string());
        writer
            .write_record(&line)
            .map_err(|e| write_err(e.into()))?;
    }
    writer.flush().map_err(write_err)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })
}
