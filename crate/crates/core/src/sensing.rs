//! Gaussian measurement matrices and noisy observations `y = Ax + z`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;
use crate::textfmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Every column scaled to unit ℓ2 norm (the experiments' convention).
    UnitColumns,
    /// Whole matrix divided by its largest singular value, so `‖A‖ = 1`
    /// (the lower-bound theorems' convention).
    OpNormLeqOne,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::UnitColumns => "unit-columns",
            Normalization::OpNormLeqOne => "op-norm",
        })
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit-columns" => Ok(Normalization::UnitColumns),
            "op-norm" => Ok(Normalization::OpNormLeqOne),
            other => Err(Error::InvalidArgument(format!("unknown normalization {other:?}"))),
        }
    }
}

/// Gaussian `m × d` matrix normalized per `norm`. `m > d` is accepted
/// even though the recovery regime of interest is `m ≤ d`.
pub fn gen_measurement_matrix(m: usize, d: usize, norm: Normalization, seed: u64) -> Result<DMatrix<f64>> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidDimension(format!(
            "measurement matrix needs positive dimensions, got {m}x{d}"
        )));
    }
    let mut rng = seed::rng(seed);
    let data: Vec<f64> = (0..m * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut a = DMatrix::from_row_slice(m, d, &data);
    match norm {
        Normalization::UnitColumns => {
            for mut col in a.column_iter_mut() {
                let nrm = col.norm();
                col /= nrm;
            }
        }
        Normalization::OpNormLeqOne => {
            let top = linalg::top_singular_value(&a);
            a /= top;
        }
    }
    Ok(a)
}

/// `Ax + z` with `z ~ N(0, σ² I)` drawn from `noise_seed`.
pub fn measure(a: &DMatrix<f64>, x: &DVector<f64>, sigma: f64, noise_seed: u64) -> Result<DVector<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    if x.len() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: x.len(),
        });
    }
    let mut y = a * x;
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).expect("sigma is finite and positive");
        let mut rng = seed::rng(noise_seed);
        for v in y.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    Ok(y)
}

/// One measurement problem together with the seeds that regenerate it.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingInstance {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub sigma: f64,
    pub x_true: DVector<f64>,
    pub normalization: Normalization,
    pub matrix_seed: u64,
    pub noise_seed: u64,
}

impl SensingInstance {
    pub fn generate(
        m: usize,
        x_true: DVector<f64>,
        sigma: f64,
        normalization: Normalization,
        matrix_seed: u64,
        noise_seed: u64,
    ) -> Result<Self> {
        let a = gen_measurement_matrix(m, x_true.len(), normalization, matrix_seed)?;
        let y = measure(&a, &x_true, sigma, noise_seed)?;
        Ok(SensingInstance {
            a,
            y,
            sigma,
            x_true,
            normalization,
            matrix_seed,
            noise_seed,
        })
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    /// Header `m d sigma normalization matrix_seed noise_seed`, then the
    /// `m` rows of `A`, then `y`, then `x_true`.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {} {} {}\n",
            self.m(),
            self.d(),
            textfmt::fmt17(self.sigma),
            self.normalization,
            self.matrix_seed,
            self.noise_seed
        );
        for row in self.a.row_iter() {
            out.push_str(&textfmt::join17(row.iter().copied()));
            out.push('\n');
        }
        out.push_str(&textfmt::join17(self.y.iter().copied()));
        out.push('\n');
        out.push_str(&textfmt::join17(self.x_true.iter().copied()));
        out.push('\n');
        out
    }

    /// Accepts the full form written by [`to_text`](Self::to_text), or the
    /// header followed by `x_true` alone, in which case `A` and `y` are
    /// regenerated from the seeds.
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = textfmt::content_lines(text).collect();
        let (hl, header) = *lines.first().ok_or_else(|| Error::parse(1, "empty input"))?;
        let f = textfmt::header_fields(header, hl, 6)?;
        let m = textfmt::parse_usize(f[0], hl)?;
        let d = textfmt::parse_usize(f[1], hl)?;
        let sigma = textfmt::parse_f64(f[2], hl)?;
        let normalization: Normalization = f[3].parse().map_err(|e: Error| Error::parse(hl, e.to_string()))?;
        let matrix_seed = textfmt::parse_u64(f[4], hl)?;
        let noise_seed = textfmt::parse_u64(f[5], hl)?;
        if m == 0 || d == 0 {
            return Err(Error::parse(hl, "dimensions must be positive"));
        }
        if sigma < 0.0 {
            return Err(Error::parse(hl, "sigma must be >= 0"));
        }
        textfmt::check_entry_budget(m, d, hl)?;

        let body = &lines[1..];
        if body.len() == 1 {
            let (xl, xs) = body[0];
            let x_true = DVector::from_vec(textfmt::parse_row(xs, xl, d)?);
            return Self::generate(m, x_true, sigma, normalization, matrix_seed, noise_seed);
        }
        if body.len() != m + 2 {
            return Err(Error::parse(
                hl,
                format!("expected 1 or {} body lines, found {}", m + 2, body.len()),
            ));
        }
        let mut data = Vec::with_capacity(m * d);
        for &(ln, row) in &body[..m] {
            data.extend(textfmt::parse_row(row, ln, d)?);
        }
        let (yl, ys) = body[m];
        let (xl, xs) = body[m + 1];
        Ok(SensingInstance {
            a: DMatrix::from_row_slice(m, d, &data),
            y: DVector::from_vec(textfmt::parse_row(ys, yl, m)?),
            sigma,
            x_true: DVector::from_vec(textfmt::parse_row(xs, xl, d)?),
            normalization,
            matrix_seed,
            noise_seed,
        })
    }
}
