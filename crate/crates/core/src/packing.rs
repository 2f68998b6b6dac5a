//! Random packings of signal sets and the closed-form quantities that
//! control them.
//!
//! A packing is built by drawing a whole batch of points from a seeded
//! sampler and keeping it only if every pair is at least `δ` apart; a
//! collision discards the batch and redraws under the next restart seed.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operator::AnalysisOperator;
use crate::seed;
use crate::signal::{gen_gaussian_k1, gen_packing_pattern, packing_free_cells, random_signs};
use crate::textfmt;

/// Largest packing the crate will build, verify or read.
pub const MAX_PACKING_POINTS: usize = 10_000;

/// Slack on the unit-ball membership check, for rounding in normalization.
const NORM_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Packing {
    pub points: Vec<DVector<f64>>,
    pub delta: f64,
    pub dim: usize,
    pub certified: bool,
}

impl Packing {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Shrink every point by `factor ∈ (0, 1]`. Scaling preserves distance
    /// ratios, so a certified packing stays certified at `delta · factor`.
    pub fn scaled(&self, factor: f64) -> Result<Packing> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "scale factor must be in (0, 1], got {factor}"
            )));
        }
        Ok(Packing {
            points: self.points.iter().map(|p| p * factor).collect(),
            delta: self.delta * factor,
            dim: self.dim,
            certified: self.certified,
        })
    }

    /// Header `count d delta certified`, then one point per line.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {}\n",
            self.points.len(),
            self.dim,
            textfmt::fmt17(self.delta),
            u8::from(self.certified)
        );
        for p in &self.points {
            out.push_str(&textfmt::join17(p.iter().copied()));
            out.push('\n');
        }
        out
    }

    /// Reads the text form. A `certified` flag is re-checked against the
    /// points, so a parsed certified packing always satisfies its bound.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = textfmt::content_lines(text);
        let (hl, header) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
        let f = textfmt::header_fields(header, hl, 4)?;
        let count = textfmt::parse_usize(f[0], hl)?;
        let dim = textfmt::parse_usize(f[1], hl)?;
        let delta = textfmt::parse_f64(f[2], hl)?;
        let certified = match f[3] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::parse(
                    hl,
                    format!("certified flag must be 0 or 1, got {other:?}"),
                ))
            }
        };
        if dim == 0 || !(delta > 0.0) {
            return Err(Error::parse(hl, "need d > 0 and delta > 0"));
        }
        if count > MAX_PACKING_POINTS {
            return Err(Error::parse(hl, format!("at most {MAX_PACKING_POINTS} points")));
        }
        textfmt::check_entry_budget(count, dim, hl)?;
        let mut points = Vec::new();
        for (ln, line) in lines {
            if points.len() == count {
                return Err(Error::parse(ln, "more points than declared"));
            }
            let p = DVector::from_vec(textfmt::parse_row(line, ln, dim)?);
            if p.norm() > 1.0 + NORM_SLACK {
                return Err(Error::parse(ln, "point lies outside the unit ball"));
            }
            points.push(p);
        }
        if points.len() != count {
            return Err(Error::parse(
                hl,
                format!("expected {count} points, found {}", points.len()),
            ));
        }
        if certified {
            let ok = points.len() < 2 || verify_packing(&points, delta)?.0;
            if !ok {
                return Err(Error::parse(hl, "certified flag set but a pair is closer than delta"));
            }
        }
        Ok(Packing {
            points,
            delta,
            dim,
            certified,
        })
    }
}

/// Seeded source of points in `K ∩ B^d`.
pub trait PointSampler: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, seed: u64) -> Result<DVector<f64>>;
}

/// Packing-pattern images with i.i.d. uniform signs.
#[derive(Debug, Clone, Copy)]
pub struct Dif2dPatternSampler {
    pub n: usize,
}

impl PointSampler for Dif2dPatternSampler {
    fn dim(&self) -> usize {
        self.n * self.n
    }

    fn sample(&self, seed: u64) -> Result<DVector<f64>> {
        sample_packing_point_dif2d(self.n, seed)
    }
}

/// Unit-norm `K₁` signals of a fixed Gaussian operator.
#[derive(Debug, Clone)]
pub struct GaussianK1Sampler {
    pub op: AnalysisOperator,
}

impl PointSampler for GaussianK1Sampler {
    fn dim(&self) -> usize {
        self.op.cols()
    }

    fn sample(&self, seed: u64) -> Result<DVector<f64>> {
        sample_packing_point_gaussian(&self.op, seed)
    }
}

/// Uniform points on the unit sphere of a `dim`-dimensional subspace.
#[derive(Debug, Clone, Copy)]
pub struct SphereSampler {
    pub dim: usize,
}

impl PointSampler for SphereSampler {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, seed: u64) -> Result<DVector<f64>> {
        let mut rng = seed::rng(seed);
        let g = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(&mut rng));
        Ok(g.normalize())
    }
}

pub fn sample_packing_point_dif2d(n: usize, seed: u64) -> Result<DVector<f64>> {
    let mut rng = seed::rng(seed);
    let signs = random_signs(packing_free_cells(n), &mut rng);
    Ok(gen_packing_pattern(n, &signs)?.x)
}

pub fn sample_packing_point_gaussian(op: &AnalysisOperator, seed: u64) -> Result<DVector<f64>> {
    Ok(gen_gaussian_k1(op, seed)?.x)
}

/// Draw `count` points as one batch; on any pair closer than `delta`,
/// redraw the whole batch with seed `seed ^ restart`.
pub fn construct_random_packing(
    sampler: &dyn PointSampler,
    delta: f64,
    count: usize,
    max_restarts: usize,
    seed: u64,
) -> Result<Packing> {
    if !(2..=MAX_PACKING_POINTS).contains(&count) {
        return Err(Error::InvalidArgument(format!(
            "packing size must be in 2..={MAX_PACKING_POINTS}, got {count}"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be > 0, got {delta}")));
    }
    let mut best = 0.0f64;
    for restart in 0..=max_restarts {
        let batch = seed ^ restart as u64;
        let points = (0..count)
            .into_par_iter()
            .map(|i| sampler.sample(seed::derive(batch, &[i as u64])))
            .collect::<Result<Vec<_>>>()?;
        if let Some(p) = points.iter().find(|p| p.norm() > 1.0 + NORM_SLACK) {
            return Err(Error::InvalidArgument(format!(
                "sampler produced a point of norm {} outside the unit ball",
                p.norm()
            )));
        }
        let (ok, min_dist) = verify_packing(&points, delta)?;
        if ok {
            return Ok(Packing {
                points,
                delta,
                dim: sampler.dim(),
                certified: true,
            });
        }
        best = best.max(min_dist);
    }
    Err(Error::PackingFailure {
        restarts: max_restarts,
        best_min_distance: best,
    })
}

/// Exhaustive pairwise check. Returns whether every pair is at least
/// `delta` apart, and the exact minimum distance.
pub fn verify_packing(points: &[DVector<f64>], delta: f64) -> Result<(bool, f64)> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("verification needs at least two points".into()));
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: p.len(),
        });
    }
    let min = min_pairwise_distance(points);
    Ok((min >= delta, min))
}

pub(crate) fn min_pairwise_distance(points: &[DVector<f64>]) -> f64 {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            points[i + 1..]
                .iter()
                .map(|q| (&points[i] - q).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Upper bound `4/|X|^{1/m}` on the minimum pairwise distance of any
/// finite subset of the unit ball in `R^m`. A single point gives 4.
pub fn min_distance_bound(count: usize, m: usize) -> f64 {
    if count <= 1 || m == 0 {
        return 4.0;
    }
    4.0 / (count as f64).powf(1.0 / m as f64)
}

/// Certified lower bound `log |X|` on the metric dimension of `K`; needs a
/// certified 1/2-packing.
pub fn metric_dimension_estimate(packing: &Packing) -> Result<f64> {
    if packing.delta != 0.5 {
        return Err(Error::InvalidArgument(format!(
            "metric dimension needs delta = 1/2, got {}",
            packing.delta
        )));
    }
    if !packing.certified {
        return Err(Error::InvalidArgument("packing is not certified".into()));
    }
    Ok((packing.len() as f64).ln())
}

/// Image of every point under `a`.
pub fn project(points: &[DVector<f64>], a: &DMatrix<f64>) -> Vec<DVector<f64>> {
    points.iter().map(|p| a * p).collect()
}

/// Size guaranteed by a pairwise collision probability `η`: `η^{-1/2}`.
pub fn random_packing_size(eta: f64) -> f64 {
    eta.powf(-0.5)
}

/// `Pr{‖x − x'‖² < q/d} ≤ exp(−q/8)` for two packing-pattern draws.
pub fn dif2d_collision_bound(q: usize) -> f64 {
    (-(q as f64) / 8.0).exp()
}

/// The overlap level `(d−1)(d+p)/(2p)` of two uniform `(d−1)`-subsets of `[p]`.
pub fn overlap_threshold(d: usize, p: usize) -> f64 {
    let (d, p) = (d as f64, p as f64);
    (d - 1.0) * (d + p) / (2.0 * p)
}

/// `Pr{|Λ ∩ Λ'| ≥ overlap_threshold} ≤ exp(−(d−1)(p−d+2)/(2p))`.
pub fn overlap_tail_bound(d: usize, p: usize) -> f64 {
    let (d, p) = (d as f64, p as f64);
    (-(d - 1.0) * (p - d + 2.0) / (2.0 * p)).exp()
}

/// `Pr{‖x − x'‖ ≤ 1/2} ≤ 3·exp(−(d−1)(p−d+2)/(4p))` for two `K₁` draws.
pub fn gaussian_collision_bound(d: usize, p: usize) -> f64 {
    let (d, p) = (d as f64, p as f64);
    3.0 * (-(d - 1.0) * (p - d + 2.0) / (4.0 * p)).exp()
}

/// Guaranteed 1/2-packing size of `K₂ ∩ S^{d−1}` under 2D-DIF: `exp(d/64)`.
pub fn dif2d_packing_size(d: usize) -> f64 {
    (d as f64 / 64.0).exp()
}

/// Guaranteed 1/2-packing size of `K₁ ∩ S^{d−1}` under a Gaussian `Ω`:
/// `exp((d−1)/8 · (1 − (d−2)/p)) / √3`.
pub fn gaussian_packing_size(d: usize, p: usize) -> f64 {
    let (d, p) = (d as f64, p as f64);
    ((d - 1.0) / 8.0 * (1.0 - (d - 2.0) / p)).exp() / 3f64.sqrt()
}
