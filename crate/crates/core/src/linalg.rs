//! Dense linear-algebra helpers built on nalgebra's SVD.

use nalgebra::{DMatrix, DVector};

/// Numerical rank threshold: `max(rows, cols) * eps * sigma_max`.
pub fn rank_threshold(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Orthonormal basis of the null space of `m` together with its numerical rank.
///
/// `m` may have fewer rows than columns; it is zero-padded so the SVD
/// exposes a full set of right singular vectors.
pub fn null_space(m: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let (rows, cols) = m.shape();
    if rows == 0 {
        return (DMatrix::identity(cols, cols), 0);
    }
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.max();
    let thresh = rank_threshold(rows, cols, sigma_max);
    let null_rows: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= thresh)
        .map(|(i, _)| i)
        .collect();
    let rank = cols - null_rows.len();
    let mut basis = DMatrix::zeros(cols, null_rows.len());
    for (k, &i) in null_rows.iter().enumerate() {
        basis.set_column(k, &v_t.row(i).transpose());
    }
    (basis, rank)
}

/// Minimum-norm least-squares solution of `m c = rhs`.
pub fn least_squares(m: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DVector::zeros(0);
    }
    let svd = m.clone().svd(true, true);
    let thresh = rank_threshold(rows, cols, svd.singular_values.max());
    svd.solve(rhs, thresh).expect("U and V were computed")
}

pub fn top_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}
