use std::fs;
use std::path::Path;

use super::{PhaseGridResult, YAxis};
use crate::error::{Error, Result};
use crate::textfmt;

pub const CSV_HEADER: &str =
    "delta,rho_or_cosparsity,mse_mean,mse_median,trials,failures,raw_mse_mean,raw_mse_median,gen_failures,successes";

const COLUMNS: usize = 10;

/// Ten significant digits; empty cells print `nan`.
fn fmt10(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.9e}")
    }
}

/// Settings as `# key = value` lines, then the header, then one row per
/// cell in y-major order.
pub fn to_csv(result: &PhaseGridResult) -> String {
    let mut out = String::new();
    let y_name = match result.y_kind {
        YAxis::Rho => "rho",
        YAxis::Cosparsity => "cosparsity",
    };
    out.push_str(&format!("# y_axis = {y_name}\n"));
    for (k, v) in &result.meta {
        out.push_str(&format!("# {k} = {v}\n"));
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (r, row) in result.cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let fields = [
                fmt10(result.x_axis[c]),
                fmt10(result.y_axis[r]),
                fmt10(cell.mse_mean),
                fmt10(cell.mse_median),
                cell.trials.to_string(),
                cell.failures.to_string(),
                fmt10(cell.raw_mean),
                fmt10(cell.raw_median),
                cell.gen_failures.to_string(),
                cell.successes.to_string(),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
    }
    out
}

pub fn export_csv(result: &PhaseGridResult, path: &Path) -> Result<()> {
    fs::write(path, to_csv(result))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub delta: f64,
    pub y: f64,
    pub mse_mean: f64,
    pub mse_median: f64,
    pub trials: usize,
    pub failures: usize,
    pub raw_mse_mean: f64,
    pub raw_mse_median: f64,
    pub gen_failures: usize,
    pub successes: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    /// `# key = value` lines, in file order.
    pub settings: Vec<(String, String)>,
    pub rows: Vec<CsvRow>,
}

/// Error columns may be `nan` (an empty cell); everything else is finite.
fn parse_mse(tok: &str, line: usize) -> Result<f64> {
    if tok == "nan" {
        Ok(f64::NAN)
    } else {
        textfmt::parse_f64(tok, line)
    }
}

/// Reads what `to_csv` writes.
pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut table = CsvTable::default();
    let mut seen_header = false;
    for (ln, line) in textfmt::content_lines(text) {
        if let Some(setting) = line.strip_prefix('#') {
            if seen_header {
                return Err(Error::parse(ln, "setting after the header"));
            }
            let (k, v) = setting
                .split_once('=')
                .ok_or_else(|| Error::parse(ln, "setting lines look like `# key = value`"))?;
            table.settings.push((k.trim().to_string(), v.trim().to_string()));
            continue;
        }
        if !seen_header {
            if line != CSV_HEADER {
                return Err(Error::parse(ln, "missing or unexpected header"));
            }
            seen_header = true;
            continue;
        }
        if table.rows.len() >= textfmt::MAX_PARSE_ENTRIES / COLUMNS {
            return Err(Error::parse(ln, "too many rows"));
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != COLUMNS {
            return Err(Error::parse(ln, format!("expected {COLUMNS} fields, got {}", f.len())));
        }
        let row = CsvRow {
            delta: textfmt::parse_f64(f[0], ln)?,
            y: textfmt::parse_f64(f[1], ln)?,
            mse_mean: parse_mse(f[2], ln)?,
            mse_median: parse_mse(f[3], ln)?,
            trials: textfmt::parse_usize(f[4], ln)?,
            failures: textfmt::parse_usize(f[5], ln)?,
            raw_mse_mean: parse_mse(f[6], ln)?,
            raw_mse_median: parse_mse(f[7], ln)?,
            gen_failures: textfmt::parse_usize(f[8], ln)?,
            successes: textfmt::parse_usize(f[9], ln)?,
        };
        if row.failures > row.trials || row.successes > row.trials {
            return Err(Error::parse(ln, "failures and successes cannot exceed trials"));
        }
        table.rows.push(row);
    }
    if !seen_header {
        return Err(Error::parse(1, "missing header"));
    }
    Ok(table)
}
