//! Analysis operators and the cosupport / subspace structure they induce.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;
use crate::textfmt;

/// Default absolute tolerance under which an entry of `Ωx` counts as zero.
pub const DEFAULT_COSUPPORT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// Cyclic horizontal differences stacked over cyclic vertical
    /// differences on an `n × n` image.
    Dif2D { n: usize },
    /// i.i.d. standard normal entries drawn from `seed`.
    Gaussian { seed: u64 },
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorKind::Dif2D { .. } => f.write_str("dif2d"),
            OperatorKind::Gaussian { .. } => f.write_str("gaussian"),
        }
    }
}

/// A `p × d` analysis operator `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOperator {
    entries: DMatrix<f64>,
    kind: OperatorKind,
}

impl AnalysisOperator {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// The submatrix formed by the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        self.entries.select_rows(rows)
    }

    /// `Ωx`. The 2D-DIF operator is applied through its stencil rather
    /// than the dense matrix.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x.len())?;
        Ok(match self.kind {
            OperatorKind::Dif2D { n } => dif2d_forward(n, x),
            OperatorKind::Gaussian { .. } => &self.entries * x,
        })
    }

    /// `Ωᵀw`.
    pub fn apply_transpose(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        if w.len() != self.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.rows(),
                got: w.len(),
            });
        }
        Ok(match self.kind {
            OperatorKind::Dif2D { n } => dif2d_adjoint(n, w),
            OperatorKind::Gaussian { .. } => self.entries.tr_mul(w),
        })
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                got: len,
            });
        }
        Ok(())
    }

    /// Text form: header `p d kind seed` followed by one line per row.
    /// With `header_only`, the rows are omitted and the reader rebuilds them.
    pub fn to_text(&self, header_only: bool) -> String {
        let seed = match self.kind {
            OperatorKind::Dif2D { .. } => 0,
            OperatorKind::Gaussian { seed } => seed,
        };
        let mut out = format!("{} {} {} {}\n", self.rows(), self.cols(), self.kind, seed);
        if !header_only {
            for row in self.entries.row_iter() {
                out.push_str(&textfmt::join17(row.iter().copied()));
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = textfmt::content_lines(text);
        let (hl, header) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
        let fields = textfmt::header_fields(header, hl, 4)?;
        let p = textfmt::parse_usize(fields[0], hl)?;
        let d = textfmt::parse_usize(fields[1], hl)?;
        let seed = textfmt::parse_u64(fields[3], hl)?;
        if p == 0 || d == 0 {
            return Err(Error::parse(hl, "dimensions must be positive"));
        }
        textfmt::check_entry_budget(p, d, hl)?;

        let rebuilt = match fields[2] {
            "dif2d" => {
                let n = (d as f64).sqrt().round() as usize;
                if n * n != d || p != 2 * d {
                    return Err(Error::parse(hl, "dif2d needs d = n^2 and p = 2d"));
                }
                Some(build_dif2d(n).map_err(|e| Error::parse(hl, e.to_string()))?)
            }
            "gaussian" => None,
            other => return Err(Error::parse(hl, format!("unknown operator kind {other:?}"))),
        };

        let mut data = Vec::new();
        let mut nrows = 0;
        for (ln, line) in lines {
            if nrows == p {
                return Err(Error::parse(ln, "more rows than declared"));
            }
            data.extend(textfmt::parse_row(line, ln, d)?);
            nrows += 1;
        }

        match rebuilt {
            Some(op) => {
                if nrows != 0 {
                    if nrows != p {
                        return Err(Error::parse(hl, format!("expected {p} rows, found {nrows}")));
                    }
                    if DMatrix::from_row_slice(p, d, &data) != op.entries {
                        return Err(Error::parse(hl, "rows disagree with the dif2d stencil"));
                    }
                }
                Ok(op)
            }
            None if nrows == 0 => build_gaussian_operator(p, d, seed),
            None if nrows == p => Ok(AnalysisOperator {
                entries: DMatrix::from_row_slice(p, d, &data),
                kind: OperatorKind::Gaussian { seed },
            }),
            None => Err(Error::parse(hl, format!("expected {p} rows, found {nrows}"))),
        }
    }
}

/// The `2d × d` cyclic 2D finite-difference operator for `n × n` images.
///
/// Pixel `(i, j)` is vector index `i·n + j`. Rows `0..d` hold
/// `X[i,j] − X[i,j+1]`, rows `d..2d` hold `X[i,j] − X[i+1,j]`, indices mod `n`.
pub fn build_dif2d(n: usize) -> Result<AnalysisOperator> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!("dif2d needs n >= 2, got {n}")));
    }
    let d = n * n;
    let mut entries = DMatrix::zeros(2 * d, d);
    for i in 0..n {
        for j in 0..n {
            let r = i * n + j;
            entries[(r, r)] = 1.0;
            entries[(r, i * n + (j + 1) % n)] = -1.0;
            entries[(d + r, r)] = 1.0;
            entries[(d + r, ((i + 1) % n) * n + j)] = -1.0;
        }
    }
    Ok(AnalysisOperator {
        entries,
        kind: OperatorKind::Dif2D { n },
    })
}

/// A `p × d` operator with i.i.d. N(0,1) entries, filled row-major from `seed`.
pub fn build_gaussian_operator(p: usize, d: usize, seed: u64) -> Result<AnalysisOperator> {
    if p == 0 || d == 0 {
        return Err(Error::InvalidDimension(format!(
            "gaussian operator needs positive dimensions, got {p}x{d}"
        )));
    }
    let mut rng = seed::rng(seed);
    let data: Vec<f64> = (0..p * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(AnalysisOperator {
        entries: DMatrix::from_row_slice(p, d, &data),
        kind: OperatorKind::Gaussian { seed },
    })
}

pub(crate) fn dif2d_forward(n: usize, x: &DVector<f64>) -> DVector<f64> {
    let d = n * n;
    let mut out = DVector::zeros(2 * d);
    for i in 0..n {
        for j in 0..n {
            let r = i * n + j;
            out[r] = x[r] - x[i * n + (j + 1) % n];
            out[d + r] = x[r] - x[((i + 1) % n) * n + j];
        }
    }
    out
}

fn dif2d_adjoint(n: usize, w: &DVector<f64>) -> DVector<f64> {
    let d = n * n;
    let mut out = DVector::zeros(d);
    for i in 0..n {
        for j in 0..n {
            let r = i * n + j;
            out[r] += w[r] + w[d + r];
            out[i * n + (j + 1) % n] -= w[r];
            out[((i + 1) % n) * n + j] -= w[d + r];
        }
    }
    out
}

/// Rows of `Ω` annihilating a signal, i.e. the complement of the support `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cosupport {
    pub zero_rows: Vec<usize>,
    pub support_size: usize,
    pub tolerance: f64,
}

impl Cosupport {
    /// Build from an explicit index set over `p` rows.
    pub fn from_rows(mut zero_rows: Vec<usize>, p: usize) -> Result<Self> {
        zero_rows.sort_unstable();
        zero_rows.dedup();
        if let Some(&last) = zero_rows.last() {
            if last >= p {
                return Err(Error::InvalidArgument(format!(
                    "cosupport row {last} out of range for p = {p}"
                )));
            }
        }
        Ok(Cosupport {
            support_size: p - zero_rows.len(),
            zero_rows,
            tolerance: 0.0,
        })
    }

    /// Zero pattern of an already computed `Ωx`.
    pub(crate) fn of_analysis(ox: &DVector<f64>, tol: f64) -> Self {
        let zero_rows: Vec<usize> = ox
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() <= tol)
            .map(|(i, _)| i)
            .collect();
        Cosupport {
            support_size: ox.len() - zero_rows.len(),
            zero_rows,
            tolerance: tol,
        }
    }

    pub fn cosparsity(&self) -> usize {
        self.zero_rows.len()
    }

    pub fn rows(&self) -> usize {
        self.zero_rows.len() + self.support_size
    }
}

pub fn cosupport(op: &AnalysisOperator, x: &DVector<f64>, tol: f64) -> Result<Cosupport> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be >= 0, got {tol}")));
    }
    Ok(Cosupport::of_analysis(&op.apply(x)?, tol))
}

/// Orthonormal basis of `K_T = { x : Ω_{T^c} x = 0 }`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    pub basis: DMatrix<f64>,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

pub fn subspace_basis(op: &AnalysisOperator, cos: &Cosupport) -> Result<SubspaceBasis> {
    if cos.rows() != op.rows() {
        return Err(Error::DimensionMismatch {
            expected: op.rows(),
            got: cos.rows(),
        });
    }
    if cos.zero_rows.iter().any(|&r| r >= op.rows()) {
        return Err(Error::InvalidArgument("cosupport row out of range".into()));
    }
    let (basis, _rank) = linalg::null_space(&op.select_rows(&cos.zero_rows));
    Ok(SubspaceBasis { basis })
}

/// Number of connected regions of an `n × n` image under cyclic 4-adjacency,
/// where neighbours join when their values differ by at most `tol`.
pub fn connected_components(image: &DMatrix<f64>, tol: f64) -> usize {
    let n = image.nrows();
    if n == 0 || image.ncols() != n {
        return 0;
    }
    let mut uf = UnionFind::new(n * n);
    for i in 0..n {
        for j in 0..n {
            let here = image[(i, j)];
            let right = (i, (j + 1) % n);
            let down = ((i + 1) % n, j);
            for (a, b) in [right, down] {
                if (here - image[(a, b)]).abs() <= tol {
                    uf.union(i * n + j, a * n + b);
                }
            }
        }
    }
    uf.count()
}

/// View a length-`n²` vector as its `n × n` image (row-major).
pub fn as_image(x: &DVector<f64>, n: usize) -> Result<DMatrix<f64>> {
    if x.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: x.len(),
        });
    }
    Ok(DMatrix::from_row_slice(n, n, x.as_slice()))
}

struct UnionFind {
    parent: Vec<usize>,
    sets: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            sets: n,
        }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
            self.sets -= 1;
        }
    }

    fn count(&self) -> usize {
        self.sets
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::VecDeque;

    #[test]
    fn dif2d_rejects_small_n() {
        assert!(matches!(build_dif2d(1), Err(Error::InvalidDimension(_))));
        assert!(matches!(build_dif2d(0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn dif2d_constant_image_vanishes() {
        let op = build_dif2d(2).unwrap();
        let y = op.apply(&DVector::from_element(4, 3.7)).unwrap();
        assert_eq!(y, DVector::zeros(8));
    }

    #[test]
    fn dif2d_wraparound_on_delta_image() {
        let op = build_dif2d(3).unwrap();
        let mut x = DVector::zeros(9);
        x[0] = 1.0;
        let y = op.apply(&x).unwrap();
        // H row for (0,0): X00 - X01 = 1; H row for (0,2): X02 - X00 = -1.
        assert_eq!(y[0], 1.0);
        assert_eq!(y[2], -1.0);
        // V row for (0,0) and its wrap partner (2,0).
        assert_eq!(y[9], 1.0);
        assert_eq!(y[9 + 6], -1.0);
        assert_eq!(y.iter().filter(|v| **v != 0.0).count(), 4);
    }

    #[test]
    fn dif2d_structure_at_n12() {
        let op = build_dif2d(12).unwrap();
        assert_eq!((op.rows(), op.cols()), (288, 144));
        for row in op.matrix().row_iter() {
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&v| v == -1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&v| v != 0.0).count(), 2);
            assert_eq!(row.sum(), 0.0);
        }
    }

    #[test]
    fn dif2d_stencil_matches_dense_matrix() {
        let op = build_dif2d(5).unwrap();
        let x = DVector::from_fn(25, |i, _| ((i * 7) % 11) as f64 - 3.5);
        let w = DVector::from_fn(50, |i, _| ((i * 3) % 13) as f64 * 0.25);
        assert!((op.apply(&x).unwrap() - op.matrix() * &x).abs().max() < 1e-13);
        assert!((op.apply_transpose(&w).unwrap() - op.matrix().tr_mul(&w)).abs().max() < 1e-13);
    }

    #[test]
    fn gaussian_operator_is_reproducible() {
        let a = build_gaussian_operator(1, 1, 0).unwrap();
        let b = build_gaussian_operator(1, 1, 0).unwrap();
        assert_eq!(a, b);
        assert!(build_gaussian_operator(0, 3, 0).is_err());
        assert!(build_gaussian_operator(3, 0, 0).is_err());
        let big = build_gaussian_operator(700, 200, 1).unwrap();
        assert_eq!((big.rows(), big.cols()), (700, 200));
    }

    #[test]
    fn gaussian_operator_mean_within_clt_bound() {
        let op = build_gaussian_operator(200, 200, 7).unwrap();
        let mean = op.matrix().mean();
        assert!(mean.abs() <= 4.0 / (200.0f64 * 200.0).sqrt(), "mean {mean}");
    }

    #[test]
    fn apply_picks_out_columns() {
        let op = build_gaussian_operator(6, 4, 3).unwrap();
        let y = op.apply(&DVector::from_fn(4, |i, _| (i == 0) as u8 as f64)).unwrap();
        assert_eq!(y, op.matrix().column(0).into_owned());
        assert!(matches!(
            op.apply(&DVector::zeros(5)),
            Err(Error::DimensionMismatch { expected: 4, got: 5 })
        ));
    }

    #[test]
    fn cosupport_of_constant_image() {
        let op = build_dif2d(4).unwrap();
        let cos = cosupport(&op, &DVector::from_element(16, 0.3), 1e-10).unwrap();
        assert_eq!(cos.cosparsity(), 32);
        assert_eq!(cos.support_size, 0);
        assert!(cosupport(&op, &DVector::zeros(16), -1.0).is_err());
    }

    /// Count unequal neighbour pairs directly on the image grid.
    fn boundary_edges(img: &[f64], n: usize) -> usize {
        let mut count = 0;
        for i in 0..n {
            for j in 0..n {
                if img[i * n + j] != img[i * n + (j + 1) % n] {
                    count += 1;
                }
                if img[i * n + j] != img[((i + 1) % n) * n + j] {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn support_size_counts_boundary_edges() {
        // 2x2 blob in a 4x4 image.
        let mut img = vec![0.0; 16];
        for (i, j) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            img[i * 4 + j] = 1.0;
        }
        let op = build_dif2d(4).unwrap();
        let cos = cosupport(&op, &DVector::from_vec(img.clone()), 1e-10).unwrap();
        assert_eq!(cos.support_size, boundary_edges(&img, 4));
        assert_eq!(cos.support_size, 8);
    }

    #[test]
    fn subspace_basis_edge_cases() {
        let op = build_gaussian_operator(5, 4, 11).unwrap();
        let empty = Cosupport::from_rows(vec![], 5).unwrap();
        let sb = subspace_basis(&op, &empty).unwrap();
        assert_eq!(sb.dim(), 4);
        assert_eq!(sb.basis, DMatrix::identity(4, 4));

        let three = Cosupport::from_rows(vec![0, 2, 4], 5).unwrap();
        let sb = subspace_basis(&op, &three).unwrap();
        assert_eq!(sb.dim(), 1);

        let dif = build_dif2d(4).unwrap();
        let all = Cosupport::from_rows((0..32).collect(), 32).unwrap();
        let sb = subspace_basis(&dif, &all).unwrap();
        assert_eq!(sb.dim(), 1);
        let c = sb.basis.column(0);
        assert!(c.iter().all(|v| (v.abs() - 0.25).abs() < 1e-12));

        assert!(Cosupport::from_rows(vec![9], 5).is_err());
        let wrong = Cosupport::from_rows(vec![0], 3).unwrap();
        assert!(subspace_basis(&op, &wrong).is_err());
    }

    #[test]
    fn general_position_gives_one_dimensional_subspaces() {
        use rand::seq::index::sample;
        for trial in 0..100u64 {
            let d = 2 + (trial as usize % 19);
            let p = d + 1 + (trial as usize % 7);
            let op = build_gaussian_operator(p, d, trial).unwrap();
            let mut rng = seed::rng(1000 + trial);
            let rows = sample(&mut rng, p, d - 1).into_vec();
            let cos = Cosupport::from_rows(rows, p).unwrap();
            let sb = subspace_basis(&op, &cos).unwrap();
            assert_eq!(sb.dim(), 1, "trial {trial}");
        }
    }

    #[test]
    fn subspace_basis_annihilates_random_cosupports() {
        use rand::seq::index::sample;
        use rand::Rng;
        for trial in 0..40u64 {
            let mut rng = seed::rng(trial);
            let d = rng.random_range(2..=50);
            let p = rng.random_range(1..=2 * d);
            let k = rng.random_range(0..=p);
            let op = build_gaussian_operator(p, d, 77 + trial).unwrap();
            let cos = Cosupport::from_rows(sample(&mut rng, p, k).into_vec(), p).unwrap();
            let sb = subspace_basis(&op, &cos).unwrap();
            let sub = op.select_rows(&cos.zero_rows);
            if sb.dim() > 0 {
                assert!((&sub * &sb.basis).abs().max() <= 1e-8);
                let gram = sb.basis.transpose() * &sb.basis;
                assert!((gram - DMatrix::<f64>::identity(sb.dim(), sb.dim())).abs().max() < 1e-10);
            }
            assert_eq!(sb.dim(), d.saturating_sub(k.min(d)));
        }
    }

    /// Independent BFS flood fill used as the oracle for `connected_components`.
    fn flood_fill_components(img: &[f64], n: usize) -> usize {
        let mut seen = vec![false; n * n];
        let mut count = 0;
        for start in 0..n * n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(c) = queue.pop_front() {
                let (i, j) = (c / n, c % n);
                let nbrs = [
                    i * n + (j + 1) % n,
                    i * n + (j + n - 1) % n,
                    ((i + 1) % n) * n + j,
                    ((i + n - 1) % n) * n + j,
                ];
                for nb in nbrs {
                    if !seen[nb] && img[nb] == img[c] {
                        seen[nb] = true;
                        queue.push_back(nb);
                    }
                }
            }
        }
        count
    }

    #[test]
    fn components_simple_cases() {
        assert_eq!(connected_components(&DMatrix::from_element(5, 5, 1.0), 0.0), 1);
        let mut blob = DMatrix::from_element(6, 6, 0.8);
        for (i, j) in [(1, 1), (1, 2), (2, 2), (3, 2), (3, 3)] {
            blob[(i, j)] = -0.4;
        }
        assert_eq!(connected_components(&blob, 1e-10), 2);
    }

    #[test]
    fn checkerboard_components_match_flood_fill() {
        let n = 4;
        let img: Vec<f64> = (0..16).map(|k| ((k / n + k % n) % 2) as f64).collect();
        let oracle = flood_fill_components(&img, n);
        assert_eq!(oracle, 16);
        assert_eq!(connected_components(&DMatrix::from_row_slice(n, n, &img), 0.0), 16);
    }

    #[test]
    fn all_two_colourings_of_3x3_match_oracle() {
        for mask in 0u32..512 {
            let img: Vec<f64> = (0..9).map(|k| ((mask >> k) & 1) as f64).collect();
            let fast = connected_components(&DMatrix::from_row_slice(3, 3, &img), 0.0);
            assert_eq!(fast, flood_fill_components(&img, 3), "mask {mask:09b}");
        }
    }

    #[test]
    fn text_round_trip_and_header_only_rebuild() {
        let g = build_gaussian_operator(4, 3, 99).unwrap();
        assert_eq!(AnalysisOperator::parse(&g.to_text(false)).unwrap(), g);
        assert_eq!(AnalysisOperator::parse(&g.to_text(true)).unwrap(), g);
        let dif = build_dif2d(3).unwrap();
        assert_eq!(dif.to_text(true), "18 9 dif2d 0\n");
        assert_eq!(AnalysisOperator::parse(&dif.to_text(true)).unwrap(), dif);
        assert_eq!(AnalysisOperator::parse(&dif.to_text(false)).unwrap(), dif);
    }

    #[test]
    fn parse_rejects_malformed() {
        for bad in [
            "",
            "4 3 gaussian",
            "0 3 gaussian 1",
            "4 3 sparse 1",
            "18 8 dif2d 0",
            "2 2 gaussian 1\n1 2\n",
            "1 2 gaussian 1\n1 2\n3 4\n",
            "1 2 gaussian 1\n1 nan\n",
            "4000000 4000000 gaussian 1",
        ] {
            assert!(AnalysisOperator::parse(bad).is_err(), "{bad:?}");
        }
    }

    proptest! {
        #[test]
        fn apply_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let mut rng = seed::rng(seed);
            let x = DVector::from_fn(16, |_, _| StandardNormal.sample(&mut rng));
            let y = DVector::from_fn(16, |_, _| StandardNormal.sample(&mut rng));
            for op in [build_dif2d(4).unwrap(), build_gaussian_operator(20, 16, seed).unwrap()] {
                let lhs = op.apply(&(alpha * &x + beta * &y)).unwrap();
                let rhs = alpha * op.apply(&x).unwrap() + beta * op.apply(&y).unwrap();
                let scale = lhs.norm().max(rhs.norm()).max(1.0);
                prop_assert!((lhs - rhs).norm() <= 1e-12 * scale);
            }
        }

        #[test]
        fn dif2d_kills_constants(n in 2usize..9, c in -100.0f64..100.0) {
            let op = build_dif2d(n).unwrap();
            let y = op.apply(&DVector::from_element(n * n, c)).unwrap();
            prop_assert!(y.iter().all(|&v| v == 0.0));
        }
    }
}
