//! Dataset CSV files and on-disk corpora.
//!
//! A dataset file has a header row, numeric feature columns and one label
//! column. The label column is the one named explicitly, else a column
//! called `class`, else the last column. Labels are `-1/+1` or `0/1`
//! (`0` maps to `-1`).
//!
//! A corpus directory holds one CSV per dataset plus `manifest.csv` with
//! columns `id,pattern,m,n,seed`; dataset `id` lives in `<id>.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tabpat::{Matrix, PatternClass, TabularDataset};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.csv";
pub const LABEL_COLUMN: &str = "class";

fn invalid<T>(msg: String) -> CliResult<T> {
    Err(CliError::Validation(msg))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if !e.is_io_error() {
        return CliError::Validation(format!("{}: {e}", path.display()));
    }
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        _ => unreachable!("is_io_error was checked"),
    }
}

fn parse_label(raw: &str) -> Option<i8> {
    let v: f64 = raw.parse().ok()?;
    if v == 1.0 {
        Some(1)
    } else if v == -1.0 {
        Some(-1)
    } else if v == 0.0 {
        Some(0)
    } else {
        None
    }
}

pub fn load_dataset_csv(path: &Path, label_column: Option<&str>) -> CliResult<TabularDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 {
        return invalid(format!("{}: need at least one feature column and a label column", path.display()));
    }
    let label_idx = match label_column {
        Some(name) => match headers.iter().position(|h| h == name) {
            Some(i) => i,
            None => return invalid(format!("{}: no column named '{name}'", path.display())),
        },
        None => headers.iter().position(|h| h == LABEL_COLUMN).unwrap_or(headers.len() - 1),
    };

    let n = headers.len() - 1;
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        // header is line 1
        let line = r + 2;
        for (j, cell) in record.iter().enumerate() {
            let column = &headers[j];
            if cell.is_empty() {
                return invalid(format!("{}: line {line}, column '{column}': empty cell", path.display()));
            }
            if j == label_idx {
                match parse_label(cell) {
                    Some(l) => raw_labels.push(l),
                    None => {
                        return invalid(format!("{}: line {line}, column '{column}': unknown label '{cell}'", path.display()))
                    }
                }
            } else {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => values.push(v),
                    _ => {
                        return invalid(format!("{}: line {line}, column '{column}': non-numeric value '{cell}'", path.display()))
                    }
                }
            }
        }
    }
    if raw_labels.is_empty() {
        return invalid(format!("{}: no data rows", path.display()));
    }
    if raw_labels.contains(&0) && raw_labels.contains(&-1) {
        return invalid(format!("{}: labels mix the -1/+1 and 0/1 conventions", path.display()));
    }
    let labels: Vec<i8> = raw_labels.iter().map(|&l| if l == 0 { -1 } else { l }).collect();
    let m = labels.len();
    let features = Matrix::from_vec(m, n, values)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(TabularDataset::new(name, features, labels)?)
}

pub fn write_dataset_csv(ds: &TabularDataset, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<String> = (1..=ds.n()).map(|j| format!("x{j}")).collect();
    header.push(LABEL_COLUMN.to_string());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..ds.m() {
        let mut row: Vec<String> = ds.features.row(i).iter().map(|v| v.to_string()).collect();
        row.push(ds.labels[i].to_string());
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub pattern: PatternClass,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
}

pub fn write_manifest(dir: &Path, entries: &[ManifestEntry]) -> CliResult<()> {
    let path = dir.join(MANIFEST);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    for e in entries {
        w.serialize(e).map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> CliResult<Vec<ManifestEntry>> {
    let path = dir.join(MANIFEST);
    let mut reader = csv::Reader::from_path(&path).map_err(|e| csv_error(&path, e))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(&path, e)))
        .collect()
}

/// Loads every dataset listed in the manifest, in manifest order, with its pattern label.
pub fn read_corpus(dir: &Path) -> CliResult<Vec<TabularDataset>> {
    let entries = read_manifest(dir)?;
    if entries.is_empty() {
        return invalid(format!("{}: manifest lists no datasets", dir.display()));
    }
    entries
        .iter()
        .map(|e| {
            let path = dir.join(format!("{}.csv", e.id));
            let ds = load_dataset_csv(&path, Some(LABEL_COLUMN))?;
            if ds.m() != e.m || ds.n() != e.n {
                return invalid(format!(
                    "{}: manifest says {}x{}, file has {}x{}",
                    path.display(),
                    e.m,
                    e.n,
                    ds.m(),
                    ds.n()
                ));
            }
            Ok(ds.with_pattern(e.pattern))
        })
        .collect()
}

/// Dataset CSV files in `dir`, sorted by name, manifest excluded.
pub fn dataset_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let path = entry.path();
        let is_csv = path.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv"));
        if is_csv && path.is_file() && path.file_name().is_some_and(|f| f != MANIFEST) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
