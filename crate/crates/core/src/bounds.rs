//! Minimax lower bounds with explicit constants, and an empirical risk
//! harness to hold estimators against them.
//!
//! Both bounds compose the packing-to-minimax argument (`δσ|X|^{1/m}/32`
//! with `δ = 1/2`) with a guaranteed packing size. The resulting constants
//! are one valid instantiation, not sharp ones.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::packing::Packing;
use crate::seed;
use crate::sensing::measure;

/// Headroom on the `‖A‖ ≤ 1` check, for the rounding in normalization.
const OPNORM_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundModel {
    /// `K₂` under the cyclic 2D difference operator.
    Dif2dK2,
    /// `K₁` under a Gaussian analysis operator.
    GaussianK1,
}

impl fmt::Display for BoundModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundModel::Dif2dK2 => "dif2d",
            BoundModel::GaussianK1 => "gaussian",
        })
    }
}

impl std::str::FromStr for BoundModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dif2d" => Ok(BoundModel::Dif2dK2),
            "gaussian" => Ok(BoundModel::GaussianK1),
            other => Err(Error::InvalidArgument(format!("unknown bound model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    pub d: usize,
    pub m: usize,
    /// Rows of Ω. Ignored by the 2D-DIF model, where `p = 2d`.
    pub p: usize,
    pub sigma: f64,
    pub model: BoundModel,
}

impl BoundQuery {
    pub fn evaluate(&self) -> Result<f64> {
        match self.model {
            BoundModel::Dif2dK2 => tv_lower_bound(self),
            BoundModel::GaussianK1 => gaussian_lower_bound(self),
        }
    }

    fn check_common(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("m must be >= 1".into()));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

fn is_square(d: usize) -> bool {
    let r = (d as f64).sqrt().round() as usize;
    r * r == d
}

/// `σ·exp(d/(64m))/64` for total-variation (2D-DIF) signals. Needs `d` a
/// square with `d ≥ 64`.
pub fn tv_lower_bound(q: &BoundQuery) -> Result<f64> {
    if q.model != BoundModel::Dif2dK2 {
        return Err(Error::InvalidArgument("tv_lower_bound needs the dif2d model".into()));
    }
    q.check_common()?;
    if q.d < 64 || !is_square(q.d) {
        return Err(Error::InvalidArgument(format!("d must be a square >= 64, got {}", q.d)));
    }
    Ok(q.sigma * (q.d as f64 / (64.0 * q.m as f64)).exp() / 64.0)
}

/// `(σ/64)·3^{−1/(2m)}·exp((d−1)(1−(d−2)/p)/(8m))` for `K₁` under a
/// Gaussian operator. Needs `p ≥ d ≥ 3`.
pub fn gaussian_lower_bound(q: &BoundQuery) -> Result<f64> {
    if q.model != BoundModel::GaussianK1 {
        return Err(Error::InvalidArgument(
            "gaussian_lower_bound needs the gaussian model".into(),
        ));
    }
    q.check_common()?;
    if q.d < 3 || q.p < q.d {
        return Err(Error::InvalidArgument(format!(
            "need p >= d >= 3, got d={} p={}",
            q.d, q.p
        )));
    }
    let (d, p, m) = (q.d as f64, q.p as f64, q.m as f64);
    let exponent = (d - 1.0) * (1.0 - (d - 2.0) / p) / (8.0 * m);
    Ok(q.sigma / 64.0 * 3f64.powf(-1.0 / (2.0 * m)) * exponent.exp())
}

/// Factor `|X|^{1/m}σ/4` that places a unit packing at the noise level where
/// its points become indistinguishable from `m` measurements.
pub fn indistinguishable_scale(count: usize, m: usize, sigma: f64) -> f64 {
    (count as f64).powf(1.0 / m as f64) * sigma / 4.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskEstimate {
    /// Largest per-point mean of `‖x̂ − x‖₂`.
    pub max_risk: f64,
    /// Standard error of that mean.
    pub stderr: f64,
    /// Packing index achieving the maximum.
    pub worst_point: usize,
    /// `(mean, stderr)` for every packing point.
    pub per_point: Vec<(f64, f64)>,
}

/// Empirical worst-case risk of `estimator` over the packing points: for each
/// point, `trials` noisy measurements with seed `hash(seed, point, trial)`.
pub fn minimax_mc<F>(
    estimator: F,
    packing: &Packing,
    a: &DMatrix<f64>,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<RiskEstimate>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    if packing.is_empty() || trials == 0 {
        return Err(Error::InvalidArgument("need at least one point and one trial".into()));
    }
    if a.ncols() != packing.dim {
        return Err(Error::DimensionMismatch {
            expected: packing.dim,
            got: a.ncols(),
        });
    }
    let top = linalg::top_singular_value(a);
    if top > 1.0 + OPNORM_SLACK {
        return Err(Error::InvalidArgument(format!("need ||A|| <= 1, got {top}")));
    }
    let per_point = packing
        .points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let errors = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let y = measure(a, x, sigma, seed::derive(seed, &[i as u64, t as u64]))?;
                    let x_hat = estimator(&y)?;
                    if x_hat.len() != x.len() {
                        return Err(Error::DimensionMismatch {
                            expected: x.len(),
                            got: x_hat.len(),
                        });
                    }
                    Ok((x_hat - x).norm())
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(mean_and_stderr(&errors))
        })
        .collect::<Result<Vec<_>>>()?;
    let (worst_point, &(max_risk, stderr)) = per_point
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .expect("packing is non-empty");
    Ok(RiskEstimate {
        max_risk,
        stderr,
        worst_point,
        per_point,
    })
}

pub(crate) fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
