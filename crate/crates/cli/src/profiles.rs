//! Per-house time series: demand, generation, tariff and outdoor temperature.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::InputError;
use crate::fmt_f64;

pub const COLUMNS: [&str; 6] = ["k", "d_kw", "r_kw", "p_buy", "p_sell", "theta_ex_c"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub k: usize,
    pub d_kw: f64,
    pub r_kw: f64,
    pub p_buy: f64,
    pub p_sell: f64,
    pub theta_ex_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub house_id: String,
    pub rows: Vec<ProfileRow>,
}

impl ProfileTable {
    pub fn steps(&self) -> usize {
        self.rows.len()
    }

    pub fn demand(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.d_kw).collect()
    }

    pub fn renewable(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.r_kw).collect()
    }

    pub fn buy(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.p_buy).collect()
    }

    pub fn sell(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.p_sell).collect()
    }

    pub fn theta_ex(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.theta_ex_c).collect()
    }
}

/// House identifier of a profile file: its file stem.
pub fn house_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads a profile CSV. With `expected_steps`, a different row count is an error.
///
/// Parsing only checks the schema, numbers, finiteness and contiguous `k`;
/// economic consistency (e.g. `p_buy >= p_sell`) is left to scenario validation.
pub fn load_profiles(path: &Path, expected_steps: Option<usize>) -> Result<ProfileTable, InputError> {
    let text = fs::read_to_string(path).map_err(|e| InputError::io(path, e))?;
    parse_profiles(&text, path, house_id_of(path), expected_steps)
}

pub fn parse_profiles(
    text: &str,
    path: &Path,
    house_id: String,
    expected_steps: Option<usize>,
) -> Result<ProfileTable, InputError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| InputError::csv(path, e))?.clone();
    for col in COLUMNS {
        if !header.iter().any(|h| h == col) {
            return Err(InputError::MissingColumn {
                path: path.to_path_buf(),
                column: col.to_string(),
            });
        }
    }
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(InputError::Header {
            path: path.to_path_buf(),
            expected: COLUMNS.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| InputError::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row_err = |message: String| InputError::Row {
            path: path.to_path_buf(),
            line,
            message,
        };
        let num = |i: usize| -> Result<f64, InputError> {
            let cell = &record[i];
            let v: f64 = cell
                .parse()
                .map_err(|_| row_err(format!("{}: \"{cell}\" is not a number", COLUMNS[i])))?;
            if !v.is_finite() {
                return Err(row_err(format!("{}: value must be finite", COLUMNS[i])));
            }
            Ok(v)
        };
        let k: usize = record[0]
            .parse()
            .map_err(|_| row_err(format!("k: \"{}\" is not a step index", &record[0])))?;
        if k != rows.len() {
            return Err(row_err(format!("k must be {} here, found {k}", rows.len())));
        }
        rows.push(ProfileRow {
            k,
            d_kw: num(1)?,
            r_kw: num(2)?,
            p_buy: num(3)?,
            p_sell: num(4)?,
            theta_ex_c: num(5)?,
        });
    }
    if let Some(expected) = expected_steps {
        if rows.len() != expected {
            return Err(InputError::RowCount {
                path: path.to_path_buf(),
                expected,
                found: rows.len(),
            });
        }
    }
    Ok(ProfileTable { house_id, rows })
}

pub fn profiles_to_string(table: &ProfileTable) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for r in &table.rows {
        let cells = [
            r.k.to_string(),
            fmt_f64(r.d_kw),
            fmt_f64(r.r_kw),
            fmt_f64(r.p_buy),
            fmt_f64(r.p_sell),
            fmt_f64(r.theta_ex_c),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_profiles(path: &Path, table: &ProfileTable) -> Result<(), InputError> {
    fs::write(path, profiles_to_string(table)).map_err(|e| InputError::io(path, e))
}

/// All `*.csv` files of a directory, sorted by name.
pub fn profile_files(dir: &Path) -> Result<Vec<PathBuf>, InputError> {
    let entries = fs::read_dir(dir).map_err(|e| InputError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| InputError::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}
