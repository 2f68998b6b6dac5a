//! Shared helpers for the whitespace-separated text formats.

use crate::error::{Error, Result};

/// Upper bound on the number of matrix entries a parser will materialize.
/// Headers are untrusted; without a cap a one-line file could request
/// terabytes.
pub const MAX_PARSE_ENTRIES: usize = 1 << 22;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn join17(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt17).collect::<Vec<_>>().join(" ")
}

/// Non-blank lines paired with their 1-based line numbers.
pub fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("not a number: {tok:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite value: {tok:?}")));
    }
    Ok(v)
}

pub fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("not a nonnegative integer: {tok:?}")))
}

pub fn parse_u64(tok: &str, line: usize) -> Result<u64> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("not a seed: {tok:?}")))
}

pub fn parse_row(text: &str, line: usize, expected: usize) -> Result<Vec<f64>> {
    let row = text
        .split_whitespace()
        .map(|t| parse_f64(t, line))
        .collect::<Result<Vec<_>>>()?;
    if row.len() != expected {
        return Err(Error::parse(
            line,
            format!("expected {expected} values, found {}", row.len()),
        ));
    }
    Ok(row)
}

pub fn header_fields(text: &str, line: usize, expected: usize) -> Result<Vec<&str>> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != expected {
        return Err(Error::parse(
            line,
            format!("header needs {expected} fields, found {}", fields.len()),
        ));
    }
    Ok(fields)
}

pub fn check_entry_budget(rows: usize, cols: usize, line: usize) -> Result<()> {
    match rows.checked_mul(cols) {
        Some(n) if n <= MAX_PARSE_ENTRIES => Ok(()),
        _ => Err(Error::parse(
            line,
            format!("{rows}x{cols} exceeds the {MAX_PARSE_ENTRIES}-entry limit"),
        )),
    }
}
