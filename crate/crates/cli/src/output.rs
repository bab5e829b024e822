use std::io::Write;
use std::path::Path;

use bsus_core::benchmarks::RunRow;
use serde::Serialize;

use crate::error::CliError;

/// Writes `bytes` to `path` via a sibling temporary file and a rename, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub const CSV_HEADER: [&str; 9] = [
    "run_index",
    "seed",
    "estimate",
    "cov",
    "eval_count",
    "levels",
    "branches",
    "maxima_found",
    "zero_flag",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-run rows as CSV; absent values are empty fields.
pub fn rows_csv(rows: &[RunRow]) -> Result<Vec<u8>, CliError> {
    let err = |e: csv::Error| CliError::Runtime(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.run_index.to_string(),
            r.seed.to_string(),
            opt(r.estimate),
            opt(r.cov),
            r.eval_count.to_string(),
            r.levels.to_string(),
            r.branches.to_string(),
            opt(r.maxima_found),
            r.zero_flag.to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}
