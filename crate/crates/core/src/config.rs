//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, list values are
//! comma-separated. Unknown or repeated keys are rejected so that a typo
//! never silently falls back to a default.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::solvers::{L0Options, L1Options};
use crate::textfmt;

/// Every key a config file may set.
pub const KNOWN_KEYS: &[&str] = &[
    "model",
    "seed",
    "sigma",
    "trials",
    "d",
    "n",
    "rho",
    "delta",
    "bins",
    "pilot_images",
    "gen_budget",
    "l1.tol",
    "l1.max_iter",
    "l1.rho",
    "l0.b_max",
    "l0.eq_tol",
];

const MAX_CONFIG_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        if text.len() > MAX_CONFIG_BYTES {
            return Err(Error::parse(1, "config file too large"));
        }
        let mut cfg = Config::default();
        for (ln, raw) in text.lines().enumerate() {
            let ln = ln + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(ln, format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::parse(ln, format!("unknown key {key:?}")));
            }
            if value.is_empty() {
                return Err(Error::parse(ln, format!("empty value for {key:?}")));
            }
            if cfg.entries.insert(key.to_owned(), value.to_owned()).is_some() {
                return Err(Error::parse(ln, format!("duplicate key {key:?}")));
            }
        }
        Ok(cfg)
    }

    /// Set or replace a value; flags applied this way win over the file.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::InvalidArgument(format!("unknown key {key:?}")));
        }
        self.entries.insert(key.to_owned(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key)
            .map_or(Ok(default), |v| value_err(key, textfmt::parse_f64(v, 0)))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.get(key)
            .map_or(Ok(default), |v| value_err(key, textfmt::parse_usize(v, 0)))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        self.get(key)
            .map_or(Ok(default), |v| value_err(key, textfmt::parse_u64(v, 0)))
    }

    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => parse_list(v).map_err(|e| Error::InvalidArgument(format!("{key}: {e}"))),
        }
    }

    /// Solver defaults overridden by any `l1.*` keys.
    pub fn l1_options(&self) -> Result<L1Options> {
        let d = L1Options::default();
        Ok(L1Options {
            tol: self.f64_or("l1.tol", d.tol)?,
            max_iter: self.usize_or("l1.max_iter", d.max_iter)?,
            rho: self.f64_or("l1.rho", d.rho)?,
            ..d
        })
    }

    pub fn l0_options(&self) -> Result<L0Options> {
        Ok(L0Options {
            eq_tol: self
                .get("l0.eq_tol")
                .map(|v| value_err("l0.eq_tol", textfmt::parse_f64(v, 0)))
                .transpose()?,
        })
    }

    pub fn l0_b_max(&self, default: usize) -> Result<usize> {
        self.usize_or("l0.b_max", default)
    }
}

fn value_err<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { msg, .. } => Error::InvalidArgument(format!("{key}: {msg}")),
        other => other,
    })
}

/// Comma-separated finite numbers.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    let out = text
        .split(',')
        .map(|t| textfmt::parse_f64(t.trim(), 0))
        .collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(Error::InvalidArgument("empty list".into()));
    }
    Ok(out)
}
