//! The three signal families: Gaussian-Ω `K₁` signals, two-region
//! random-walk images, and the sign patterns used to pack `K₂ ∩ S^{d−1}`.

use std::collections::HashSet;
use std::fmt;

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::{
    as_image, connected_components, cosupport, dif2d_forward, AnalysisOperator, Cosupport, OperatorKind,
    DEFAULT_COSUPPORT_TOL,
};
use crate::seed;
use crate::textfmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalSource {
    GaussianK1,
    RandomWalkImage,
    PackingPattern,
}

impl fmt::Display for SignalSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignalSource::GaussianK1 => "gaussian-k1",
            SignalSource::RandomWalkImage => "random-walk",
            SignalSource::PackingPattern => "packing-pattern",
        })
    }
}

impl std::str::FromStr for SignalSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-k1" => Ok(SignalSource::GaussianK1),
            "random-walk" => Ok(SignalSource::RandomWalkImage),
            "packing-pattern" => Ok(SignalSource::PackingPattern),
            other => Err(Error::InvalidArgument(format!("unknown signal source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosparseSignal {
    pub x: DVector<f64>,
    pub cosupport: Cosupport,
    /// Dimension of the subspace `K_T` containing `x`.
    pub b: usize,
    pub source: SignalSource,
    /// Rows forced to vanish during generation (`Λ` for `K₁` signals).
    pub forced_rows: Option<Vec<usize>>,
}

impl CosparseSignal {
    /// Text form: `d b source` then the entries on one line.
    pub fn to_text(&self) -> String {
        format!(
            "{} {} {}\n{}\n",
            self.x.len(),
            self.b,
            self.source,
            textfmt::join17(self.x.iter().copied())
        )
    }
}

/// A signal as read back from its text form. The cosupport is not stored;
/// recompute it against the operator with [`cosupport`].
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub x: DVector<f64>,
    pub b: usize,
    pub source: SignalSource,
}

impl SignalRecord {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = textfmt::content_lines(text);
        let (hl, header) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
        let fields = textfmt::header_fields(header, hl, 3)?;
        let d = textfmt::parse_usize(fields[0], hl)?;
        let b = textfmt::parse_usize(fields[1], hl)?;
        let source: SignalSource = fields[2].parse().map_err(|e: Error| Error::parse(hl, e.to_string()))?;
        if d == 0 || b > d {
            return Err(Error::parse(hl, format!("inconsistent d = {d}, b = {b}")));
        }
        textfmt::check_entry_budget(1, d, hl)?;
        let (el, entries) = lines
            .next()
            .ok_or_else(|| Error::parse(hl + 1, "missing entries line"))?;
        let x = textfmt::parse_row(entries, el, d)?;
        if let Some((extra, _)) = lines.next() {
            return Err(Error::parse(extra, "trailing content"));
        }
        Ok(SignalRecord {
            x: DVector::from_vec(x),
            b,
            source,
        })
    }
}

/// Unit-norm signal spanning the null space of `d − 1` uniformly chosen rows of `Ω`.
pub fn gen_gaussian_k1(op: &AnalysisOperator, seed: u64) -> Result<CosparseSignal> {
    if !matches!(op.kind(), OperatorKind::Gaussian { .. }) {
        return Err(Error::InvalidArgument("K1 signals need a Gaussian operator".into()));
    }
    let (p, d) = (op.rows(), op.cols());
    if p + 1 < d {
        return Err(Error::InvalidArgument(format!(
            "need p >= d - 1 rows to pick from, got p = {p}, d = {d}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut rows = sample(&mut rng, p, d - 1).into_vec();
    rows.sort_unstable();
    let (basis, _) = linalg::null_space(&op.select_rows(&rows));
    if basis.ncols() != 1 {
        return Err(Error::DegenerateOperator { dim: basis.ncols() });
    }
    let mut x = basis.column(0).normalize();
    if rng.random_bool(0.5) {
        x.neg_mut();
    }
    let cosupport = cosupport(op, &x, DEFAULT_COSUPPORT_TOL)?;
    Ok(CosparseSignal {
        x,
        cosupport,
        b: 1,
        source: SignalSource::GaussianK1,
        forced_rows: Some(rows),
    })
}

/// Two-valued image: uniform `[0, 1]` background with a self-avoiding
/// random-walk path of one value in `[−1, 0]`.
///
/// The walk moves to a uniformly chosen cyclic 4-neighbour and stops the
/// first time it steps onto a pixel it already visited. Images whose walk
/// splits the background into several regions are discarded; retry `k`
/// uses seed `seed + k`.
pub fn gen_randomwalk_image(n: usize, seed: u64, max_retries: usize) -> Result<CosparseSignal> {
    if n < 3 {
        return Err(Error::InvalidDimension(format!(
            "random-walk images need n >= 3, got {n}"
        )));
    }
    let attempts = max_retries + 1;
    for k in 0..attempts {
        let x = randomwalk_attempt(n, seed.wrapping_add(k as u64));
        if connected_components(&as_image(&x, n)?, 0.0) == 2 {
            let cos = Cosupport::of_analysis(&dif2d_forward(n, &x), DEFAULT_COSUPPORT_TOL);
            return Ok(CosparseSignal {
                x,
                cosupport: cos,
                b: 2,
                source: SignalSource::RandomWalkImage,
                forced_rows: None,
            });
        }
    }
    Err(Error::GenerationFailure { attempts })
}

fn randomwalk_attempt(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = seed::rng(seed);
    let background: f64 = rng.random_range(0.0..=1.0);
    let walk_value: f64 = rng.random_range(-1.0..=0.0);
    let (mut i, mut j) = (rng.random_range(0..n), rng.random_range(0..n));
    let mut visited = HashSet::from([(i, j)]);
    loop {
        (i, j) = match rng.random_range(0..4u8) {
            0 => (i, (j + 1) % n),
            1 => (i, (j + n - 1) % n),
            2 => ((i + 1) % n, j),
            _ => ((i + n - 1) % n, j),
        };
        if !visited.insert((i, j)) {
            break;
        }
    }
    let mut x = DVector::from_element(n * n, background);
    for (a, b) in visited {
        x[a * n + b] = walk_value;
    }
    x
}

/// Number of free cells `q = n(n−2)/3` in the packing pattern.
pub fn packing_free_cells(n: usize) -> usize {
    n * n.saturating_sub(2) / 3
}

/// Deterministic `±1/n` image with `q = n(n−2)/3` free cells.
///
/// Rows repeat with period three:
/// * `i ≡ 0`: `+` in columns `0..n−1`, `−` in column `n−1`;
/// * `i ≡ 1`: `+` in column 0, `−` in column `n−1`, free cells between;
/// * `i ≡ 2`: `+` in column 0, `−` in columns `1..n`.
///
/// Every free cell touches a fixed `+` cell above and a fixed `−` cell
/// below, so each sign assignment yields exactly two regions.
pub fn gen_packing_pattern(n: usize, signs: &[i8]) -> Result<CosparseSignal> {
    if n < 6 || !n.is_multiple_of(3) {
        return Err(Error::InvalidArgument(format!(
            "packing pattern needs n >= 6 divisible by 3, got {n}"
        )));
    }
    let q = packing_free_cells(n);
    if signs.len() != q {
        return Err(Error::InvalidArgument(format!(
            "expected {q} signs, got {}",
            signs.len()
        )));
    }
    if let Some(bad) = signs.iter().find(|s| s.abs() != 1) {
        return Err(Error::InvalidArgument(format!("signs must be +-1, got {bad}")));
    }
    let h = 1.0 / n as f64;
    let mut free = signs.iter();
    let mut x = DVector::zeros(n * n);
    for i in 0..n {
        for j in 0..n {
            x[i * n + j] = match (i % 3, j) {
                (_, 0) => h,
                (_, j) if j == n - 1 => -h,
                (0, _) => h,
                (2, _) => -h,
                _ => f64::from(*free.next().expect("q free cells")) * h,
            };
        }
    }
    let cos = Cosupport::of_analysis(&dif2d_forward(n, &x), DEFAULT_COSUPPORT_TOL);
    Ok(CosparseSignal {
        x,
        cosupport: cos,
        b: 2,
        source: SignalSource::PackingPattern,
        forced_rows: None,
    })
}

pub fn random_signs<R: Rng + ?Sized>(q: usize, rng: &mut R) -> Vec<i8> {
    (0..q).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_dif2d, build_gaussian_operator, subspace_basis};

    #[test]
    fn k1_signal_lies_in_forced_null_space() {
        let op = build_gaussian_operator(40, 20, 5).unwrap();
        for s in 0..10 {
            let sig = gen_gaussian_k1(&op, s).unwrap();
            let rows = sig.forced_rows.as_ref().unwrap();
            assert_eq!(rows.len(), 19);
            let residual = op.select_rows(rows) * &sig.x;
            assert!(residual.amax() <= 1e-8);
            assert!((sig.x.norm() - 1.0).abs() <= 1e-10);
            assert_eq!(sig.b, 1);
            assert!(sig.cosupport.cosparsity() >= 19);
            assert_eq!(subspace_basis(&op, &sig.cosupport).unwrap().dim(), 1);
        }
    }

    #[test]
    fn k1_cosparsity_is_exactly_d_minus_one() {
        let op = build_gaussian_operator(400, 200, 2024).unwrap();
        for s in 0..100 {
            let sig = gen_gaussian_k1(&op, s).unwrap();
            assert_eq!(sig.cosupport.cosparsity(), 199, "seed {s}");
        }
    }

    #[test]
    fn k1_square_operator_and_determinism() {
        let op = build_gaussian_operator(6, 6, 1).unwrap();
        let a = gen_gaussian_k1(&op, 3).unwrap();
        let b = gen_gaussian_k1(&op, 3).unwrap();
        assert_eq!(a, b);
        // Same line as the 5x6 homogeneous system.
        let (basis, _) = linalg::null_space(&op.select_rows(a.forced_rows.as_ref().unwrap()));
        assert!((a.x.dot(&basis.column(0)).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k1_rejects_bad_operators() {
        assert!(gen_gaussian_k1(&build_dif2d(3).unwrap(), 0).is_err());
        assert!(gen_gaussian_k1(&build_gaussian_operator(2, 5, 0).unwrap(), 0).is_err());
    }

    #[test]
    fn random_walk_images_have_two_values_and_regions() {
        for s in 0..200 {
            let sig = gen_randomwalk_image(12, s, 50).unwrap();
            let mut vals: Vec<f64> = sig.x.iter().copied().collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            assert_eq!(vals.len(), 2);
            assert_eq!(connected_components(&as_image(&sig.x, 12).unwrap(), 0.0), 2);
            assert_eq!(sig.b, 2);
            let walk = vals[0];
            assert!((-1.0..=0.0).contains(&walk));
            assert!((0.0..=1.0).contains(&vals[1]));
            assert!(sig.x.iter().filter(|&&v| v == walk).count() >= 2);
            let op = build_dif2d(12).unwrap();
            assert_eq!(subspace_basis(&op, &sig.cosupport).unwrap().dim(), 2);
        }
    }

    #[test]
    fn random_walk_cosparsity_spread() {
        let d = 144;
        let cosp: Vec<usize> = (0..1000)
            .map(|s| gen_randomwalk_image(12, s * 7919, 100).unwrap().cosupport.cosparsity())
            .collect();
        let lo = *cosp.iter().min().unwrap();
        let hi = *cosp.iter().max().unwrap();
        // The smallest walk (2 pixels) cuts 6 edges; anything longer cuts more.
        assert!(hi <= 2 * d - 6);
        assert!(cosp.iter().all(|&c| c % 2 == 0));
        assert!(hi - lo >= 20, "range {lo}..{hi}");
    }

    #[test]
    fn random_walk_rejects_small_grids_and_fails_honestly() {
        assert!(gen_randomwalk_image(2, 0, 10).is_err());
    }

    #[test]
    fn packing_pattern_counts_and_norm() {
        assert_eq!(packing_free_cells(12), 40);
        let sig = gen_packing_pattern(12, &[1; 40]).unwrap();
        assert!((sig.x.norm() - 1.0).abs() <= 1e-12);
        assert!(sig.x.iter().all(|v| (v.abs() - 1.0 / 12.0).abs() < 1e-15));
        assert_eq!(connected_components(&as_image(&sig.x, 12).unwrap(), 0.0), 2);
    }

    #[test]
    fn packing_pattern_always_two_regions() {
        let mut rng = seed::rng(42);
        for _ in 0..200 {
            let sig = gen_packing_pattern(12, &random_signs(40, &mut rng)).unwrap();
            assert_eq!(connected_components(&as_image(&sig.x, 12).unwrap(), 0.0), 2);
            assert!((sig.x.norm() - 1.0).abs() <= 1e-12);
        }
        // Smallest admissible size, exhaustively.
        for mask in 0u32..(1 << 8) {
            let signs: Vec<i8> = (0..8).map(|k| if mask >> k & 1 == 1 { 1 } else { -1 }).collect();
            let sig = gen_packing_pattern(6, &signs).unwrap();
            assert_eq!(connected_components(&as_image(&sig.x, 6).unwrap(), 0.0), 2);
        }
    }

    #[test]
    fn packing_pattern_distance_is_hamming() {
        let mut rng = seed::rng(9);
        for _ in 0..50 {
            let a = random_signs(40, &mut rng);
            let b = random_signs(40, &mut rng);
            let k = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            let xa = gen_packing_pattern(12, &a).unwrap().x;
            let xb = gen_packing_pattern(12, &b).unwrap().x;
            let dist2 = (xa - xb).norm_squared();
            assert!((dist2 - 4.0 * k as f64 / 144.0).abs() < 1e-13);
        }
    }

    #[test]
    fn packing_pattern_mean_distance() {
        // E[n²‖x − x'‖²] = 4 · q/2; compare the sample mean within 3 SE.
        let mut rng = seed::rng(77);
        let n = 12.0;
        let q = 40.0;
        let samples: Vec<f64> = (0..10_000)
            .map(|_| {
                let xa = gen_packing_pattern(12, &random_signs(40, &mut rng)).unwrap().x;
                let xb = gen_packing_pattern(12, &random_signs(40, &mut rng)).unwrap().x;
                (xa - xb).norm_squared()
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        let se = (var / samples.len() as f64).sqrt();
        let expected = 2.0 * q / (n * n);
        assert!((mean - expected).abs() <= 3.0 * se, "mean {mean} expected {expected}");
    }

    #[test]
    fn packing_pattern_argument_errors() {
        assert!(gen_packing_pattern(10, &[1; 26]).is_err());
        assert!(gen_packing_pattern(3, &[1; 1]).is_err());
        assert!(gen_packing_pattern(12, &[1; 39]).is_err());
        let mut bad = vec![1i8; 40];
        bad[3] = 0;
        assert!(gen_packing_pattern(12, &bad).is_err());
    }

    #[test]
    fn signal_text_round_trip() {
        let sig = gen_packing_pattern(6, &[1, -1, 1, -1, 1, 1, -1, -1]).unwrap();
        let rec = SignalRecord::parse(&sig.to_text()).unwrap();
        assert_eq!(rec.x, sig.x);
        assert_eq!(rec.b, 2);
        assert_eq!(rec.source, SignalSource::PackingPattern);
        for bad in [
            "",
            "3 1 gaussian-k1",
            "3 1 foo\n1 2 3",
            "2 3 random-walk\n1 2",
            "2 1 random-walk\n1 2\n3",
        ] {
            assert!(SignalRecord::parse(bad).is_err(), "{bad:?}");
        }
    }
}
