//! Combinatorial analysis ℓ0: `minimize ‖Ωx‖₀ subject to y = Ax`.
//!
//! Cosupports are visited from largest to smallest (lexicographic within a
//! size), so the first consistent candidate has maximal cosparsity. Only
//! practical for `p` up to about 18.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use super::SolverReport;
use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::AnalysisOperator;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct L0Options {
    /// Exact-fit threshold on `‖y − Ax̂‖₂`; defaults to `1e-8·(1 + ‖y‖₂)`.
    pub eq_tol: Option<f64>,
}

pub fn solve_analysis_l0(
    a: &DMatrix<f64>,
    omega: &AnalysisOperator,
    y: &DVector<f64>,
    b_max: usize,
    opts: &L0Options,
) -> Result<SolverReport> {
    let (m, d) = a.shape();
    if omega.cols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: omega.cols(),
        });
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: y.len(),
        });
    }
    let eq_tol = opts.eq_tol.unwrap_or(1e-8 * (1.0 + y.norm()));
    let p = omega.rows();
    let mut examined = 0;

    for size in (0..=p).rev() {
        // rank(Ω_Z) ≤ |Z|, so every smaller cosupport has b ≥ d − |Z|.
        if d.saturating_sub(size) > b_max {
            break;
        }
        for rows in (0..p).combinations(size) {
            examined += 1;
            let (basis, _) = linalg::null_space(&omega.select_rows(&rows));
            if basis.ncols() > b_max {
                continue;
            }
            let x_hat = if basis.ncols() == 0 {
                DVector::zeros(d)
            } else {
                let coeffs = linalg::least_squares(&(a * &basis), y);
                &basis * coeffs
            };
            let residual = (y - a * &x_hat).norm();
            if residual <= eq_tol {
                let ox = omega.apply(&x_hat)?;
                let zero_tol = 1e-8 * (1.0 + x_hat.norm());
                let objective = ox.iter().filter(|v| v.abs() > zero_tol).count() as f64;
                return Ok(SolverReport {
                    x_hat,
                    objective,
                    residual,
                    iterations: examined,
                    converged: true,
                    primal_residual: residual,
                    dual_residual: 0.0,
                });
            }
        }
    }
    Err(Error::NoSolution { b_max })
}
