use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::CliError;
use crate::data::Dataset;

/// Reads a numeric CSV (rows = observations). A first row that does not
/// parse as numbers is taken as a header.
pub fn read_dataset(path: &Path) -> Result<(Dataset, Option<Vec<String>>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut header = None;
    let mut values = Vec::new();
    let mut p = None;
    let mut n = 0;
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| CliError::Input(format!("{}: row {row}: {e}", path.display())))?;
        if k == 0 && record.iter().all(|f| !f.is_empty() && f.parse::<f64>().is_err()) {
            header = Some(record.iter().map(str::to_owned).collect());
            p = Some(record.len());
            continue;
        }
        let width = *p.get_or_insert(record.len());
        if record.len() != width {
            return Err(CliError::Input(format!(
                "{}: row {row} has {} columns, expected {width}",
                path.display(),
                record.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                let what = if field.is_empty() {
                    "missing value".to_string()
                } else {
                    format!("malformed value '{field}'")
                };
                CliError::Input(format!("{}: {what} at row {row}, column {}", path.display(), col + 1))
            })?;
            values.push(v);
        }
        n += 1;
    }
    let p = p.unwrap_or(0);
    if n == 0 {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    let data = Dataset::new(n, p, values).map_err(|e| CliError::Input(e.to_string()))?;
    Ok((data, header))
}

pub fn write_dataset(path: &Path, data: &Dataset, header: &[String]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(io_err(path))?;
    for row in data.rows() {
        w.write_record(row.iter().map(|v| num(*v))).map_err(io_err(path))?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    writeln!(out)
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:?}")
    }
}

/// `out.json` → `out.manifest.json`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}
