use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Two-point Bayes test under a uniform prior: pick the candidate whose
/// measurements are nearer to `y`. Returns 1 or 2; exact ties go to 1.
pub fn bayes_two_point(a: &DMatrix<f64>, x1: &DVector<f64>, x2: &DVector<f64>, y: &DVector<f64>) -> Result<usize> {
    let (m, d) = a.shape();
    for (len, expected) in [(x1.len(), d), (x2.len(), d), (y.len(), m)] {
        if len != expected {
            return Err(Error::DimensionMismatch { expected, got: len });
        }
    }
    let r1 = (a * x1 - y).norm_squared();
    let r2 = (a * x2 - y).norm_squared();
    Ok(if r2 < r1 { 2 } else { 1 })
}
