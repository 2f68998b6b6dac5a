//! Monte Carlo checks of the probability bounds behind the packing
//! constructions, each reported as an empirical value against a closed form.

use std::fmt;

use nalgebra::DVector;
use rand::seq::index::sample;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::operator::build_gaussian_operator;
use crate::packing::{
    self, construct_random_packing, dif2d_collision_bound, gaussian_collision_bound, min_distance_bound,
    overlap_tail_bound, overlap_threshold, sample_packing_point_dif2d, sample_packing_point_gaussian,
    Dif2dPatternSampler,
};
use crate::seed::{self, stream};
use crate::sensing::{gen_measurement_matrix, measure, Normalization};
use crate::signal::packing_free_cells;
use crate::solvers::bayes_two_point;

/// Largest projected point set that is sampled rather than certified.
const CERTIFY_UP_TO: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundCheck {
    /// Two packing-pattern draws closer than `q/d` in squared distance.
    L3Collision,
    /// Overlap of two uniform `(d−1)`-subsets of `[p]`.
    L5Overlap,
    /// Two `K₁` draws of one Gaussian operator within distance 1/2.
    L4Collision,
    /// Minimum distance of a projected point set.
    L6Distance,
    /// Success rate of the two-point Bayes test.
    L7Bayes,
}

impl BoundCheck {
    pub const ALL: [BoundCheck; 5] = [
        BoundCheck::L3Collision,
        BoundCheck::L5Overlap,
        BoundCheck::L4Collision,
        BoundCheck::L6Distance,
        BoundCheck::L7Bayes,
    ];
}

impl fmt::Display for BoundCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundCheck::L3Collision => "L3-collision",
            BoundCheck::L5Overlap => "L5-overlap",
            BoundCheck::L4Collision => "L4-collision",
            BoundCheck::L6Distance => "L6-distance",
            BoundCheck::L7Bayes => "L7-bayes",
        })
    }
}

impl std::str::FromStr for BoundCheck {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundCheck::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown check {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McParams {
    /// Image side for the 2D-DIF checks.
    pub n: usize,
    /// Signal dimension and operator rows for the Gaussian checks.
    pub d: usize,
    pub p: usize,
    /// Measurements for the distance check.
    pub m: usize,
    /// Points projected by the distance check.
    pub count: usize,
    /// `ε/2σ` for the Bayes check.
    pub ratio: f64,
}

impl Default for McParams {
    fn default() -> Self {
        McParams {
            n: 12,
            d: 20,
            p: 60,
            m: 4,
            count: 10,
            ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub check: BoundCheck,
    pub empirical: f64,
    pub bound: f64,
    /// Monte Carlo standard error of `empirical` (zero for the distance check).
    pub stderr: f64,
    pub trials: usize,
    pub pass: bool,
}

impl fmt::Display for McReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} empirical={:.6e} bound={:.6e} stderr={:.2e} trials={} {}",
            self.check,
            self.empirical,
            self.bound,
            self.stderr,
            self.trials,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

fn frequency(hits: usize, trials: usize) -> (f64, f64) {
    let f = hits as f64 / trials as f64;
    (f, (f * (1.0 - f) / trials as f64).sqrt())
}

fn count_hits<F>(trials: usize, hit: F) -> Result<usize>
where
    F: Fn(u64) -> Result<bool> + Sync,
{
    let flags = (0..trials as u64)
        .into_par_iter()
        .map(&hit)
        .collect::<Result<Vec<bool>>>()?;
    Ok(flags.into_iter().filter(|&b| b).count())
}

pub fn run_check(check: BoundCheck, params: &McParams, trials: usize, seed: u64) -> Result<McReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    match check {
        BoundCheck::L3Collision => l3_collision(params.n, trials, seed),
        BoundCheck::L5Overlap => l5_overlap(params.d, params.p, trials, seed),
        BoundCheck::L4Collision => l4_collision(params.d, params.p, trials, seed),
        BoundCheck::L6Distance => l6_distance(params.n, params.count, params.m, trials, seed),
        BoundCheck::L7Bayes => l7_bayes(params.ratio, trials, seed),
    }
}

/// Frequency of `‖x − x'‖² < q/d` over `pairs` independent pattern pairs,
/// against `exp(−q/8)`.
pub fn l3_collision(n: usize, pairs: usize, seed: u64) -> Result<McReport> {
    let q = packing_free_cells(n);
    let threshold = q as f64 / (n * n) as f64;
    let hits = count_hits(pairs, |k| {
        let a = sample_packing_point_dif2d(n, seed::derive(seed, &[k, 0]))?;
        let b = sample_packing_point_dif2d(n, seed::derive(seed, &[k, 1]))?;
        Ok((a - b).norm_squared() < threshold)
    })?;
    let (empirical, stderr) = frequency(hits, pairs);
    let bound = dif2d_collision_bound(q);
    Ok(McReport {
        check: BoundCheck::L3Collision,
        empirical,
        bound,
        stderr,
        trials: pairs,
        pass: empirical <= bound,
    })
}

/// Frequency of `|Λ ∩ Λ'| ≥ (d−1)(d+p)/(2p)` for uniform `(d−1)`-subsets.
pub fn l5_overlap(d: usize, p: usize, pairs: usize, seed: u64) -> Result<McReport> {
    if d < 2 || p < d - 1 {
        return Err(Error::InvalidArgument(format!("need p >= d - 1 >= 1, got d={d} p={p}")));
    }
    let threshold = overlap_threshold(d, p);
    let hits = count_hits(pairs, |k| {
        let mut rng = seed::rng(seed::derive(seed, &[k]));
        let mut mark = vec![false; p];
        for i in sample(&mut rng, p, d - 1) {
            mark[i] = true;
        }
        let overlap = sample(&mut rng, p, d - 1).into_iter().filter(|&i| mark[i]).count();
        Ok(overlap as f64 >= threshold)
    })?;
    let (empirical, stderr) = frequency(hits, pairs);
    let bound = overlap_tail_bound(d, p);
    Ok(McReport {
        check: BoundCheck::L5Overlap,
        empirical,
        bound,
        stderr,
        trials: pairs,
        pass: empirical <= bound,
    })
}

/// Frequency of `‖x − x'‖ ≤ 1/2` for two `K₁` draws of the same operator,
/// with a fresh operator for every pair.
pub fn l4_collision(d: usize, p: usize, pairs: usize, seed: u64) -> Result<McReport> {
    if d < 3 || p < d {
        return Err(Error::InvalidArgument(format!("need p >= d >= 3, got d={d} p={p}")));
    }
    let hits = count_hits(pairs, |k| {
        let s = seed::derive(seed, &[k]);
        let op = build_gaussian_operator(p, d, seed::derive(s, &[stream::OPERATOR]))?;
        let a = sample_packing_point_gaussian(&op, seed::derive(s, &[stream::SIGNAL, 0]))?;
        let b = sample_packing_point_gaussian(&op, seed::derive(s, &[stream::SIGNAL, 1]))?;
        Ok((a - b).norm() <= 0.5)
    })?;
    let (empirical, stderr) = frequency(hits, pairs);
    let bound = gaussian_collision_bound(d, p);
    Ok(McReport {
        check: BoundCheck::L4Collision,
        empirical,
        bound,
        stderr,
        trials: pairs,
        pass: empirical <= bound,
    })
}

/// Largest (over `trials` random `‖A‖ = 1` maps) minimum pairwise distance
/// of `count` projected points, against `4/count^{1/m}`. Up to 64 points
/// form a certified 1/2-packing; larger sets are plain pattern draws.
pub fn l6_distance(n: usize, count: usize, m: usize, trials: usize, seed: u64) -> Result<McReport> {
    if !(2..=packing::MAX_PACKING_POINTS).contains(&count) || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= count <= {} and m >= 1",
            packing::MAX_PACKING_POINTS
        )));
    }
    let points: Vec<DVector<f64>> = if count <= CERTIFY_UP_TO {
        construct_random_packing(&Dif2dPatternSampler { n }, 0.5, count, 50, seed)?.points
    } else {
        (0..count)
            .into_par_iter()
            .map(|i| sample_packing_point_dif2d(n, seed::derive(seed, &[stream::SIGNAL, i as u64])))
            .collect::<Result<Vec<_>>>()?
    };
    let bound = min_distance_bound(count, m);
    let mut worst = 0.0f64;
    let mut held = 0;
    for t in 0..trials {
        let a = gen_measurement_matrix(
            m,
            n * n,
            Normalization::OpNormLeqOne,
            seed::derive(seed, &[stream::MATRIX, t as u64]),
        )?;
        let min = packing::min_pairwise_distance(&packing::project(&points, &a));
        worst = worst.max(min);
        if min <= bound {
            held += 1;
        }
    }
    Ok(McReport {
        check: BoundCheck::L6Distance,
        empirical: worst,
        bound,
        stderr: 0.0,
        trials,
        pass: held == trials,
    })
}

pub fn normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

/// Success rate of the two-point Bayes test at `ε/2σ = ratio` (σ = 1).
/// The exact law is `Φ(ratio)`; the check is one-sided:
/// `empirical ≤ Φ(ratio) + 3·stderr`.
pub fn l7_bayes(ratio: f64, trials: usize, seed: u64) -> Result<McReport> {
    let rate = bayes_success_rate(ratio, trials, seed)?;
    let bound = normal_cdf(ratio);
    Ok(McReport {
        check: BoundCheck::L7Bayes,
        empirical: rate.0,
        bound,
        stderr: rate.1,
        trials,
        pass: rate.0 <= bound + 3.0 * rate.1,
    })
}

/// `(rate, stderr)` of the Bayes test picking the true point, with the truth
/// alternating between the two candidates.
pub fn bayes_success_rate(ratio: f64, trials: usize, seed: u64) -> Result<(f64, f64)> {
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::InvalidArgument(format!("ratio must be > 0, got {ratio}")));
    }
    let (m, d, sigma) = (4, 16, 1.0);
    let a = gen_measurement_matrix(m, d, Normalization::OpNormLeqOne, seed::derive(seed, &[stream::MATRIX]))?;
    let mut rng = seed::rng(seed::derive(seed, &[stream::SIGNAL]));
    let x1: DVector<f64> = DVector::from_fn(d, |_, _| {
        rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)
    });
    let w: DVector<f64> = DVector::from_fn(d, |_, _| {
        rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)
    });
    let eps = 2.0 * ratio * sigma;
    let x2 = &x1 + &w * (eps / (&a * &w).norm());
    let hits = count_hits(trials, |t| {
        let (truth, idx) = if t % 2 == 0 { (&x1, 1) } else { (&x2, 2) };
        let y = measure(&a, truth, sigma, seed::derive(seed, &[stream::NOISE, t]))?;
        Ok(bayes_two_point(&a, &x1, &x2, &y)? == idx)
    })?;
    Ok(frequency(hits, trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in BoundCheck::ALL {
            assert_eq!(c.to_string().parse::<BoundCheck>().unwrap(), c);
        }
        assert!("L9-nothing".parse::<BoundCheck>().is_err());
    }

    #[test]
    fn small_runs_pass_and_are_deterministic() {
        let params = McParams::default();
        for c in BoundCheck::ALL {
            let r = run_check(c, &params, 500, 3).unwrap();
            assert!(r.pass, "{r}");
            assert_eq!(r, run_check(c, &params, 500, 3).unwrap());
        }
        assert!(run_check(BoundCheck::L7Bayes, &params, 0, 0).is_err());
    }

    #[test]
    fn overlap_frequency_matches_exact_count() {
        // Threshold 4·13/16 = 3.25, so only full overlap counts: 1/C(8,4) = 1/70.
        let (d, p) = (5, 8);
        let r = l5_overlap(d, p, 20_000, 1).unwrap();
        assert!((r.empirical - 1.0 / 70.0).abs() <= 4.0 * r.stderr, "{r}");
    }

    #[test]
    fn bayes_rate_tracks_normal_cdf() {
        let (rate, se) = bayes_success_rate(1.0, 20_000, 5).unwrap();
        assert!((rate - normal_cdf(1.0)).abs() <= 4.0 * se, "{rate}");
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn display_is_one_line() {
        let r = run_check(BoundCheck::L3Collision, &McParams::default(), 100, 0).unwrap();
        let s = r.to_string();
        assert!(s.starts_with("L3-collision") && s.ends_with("PASS") && !s.contains('\n'));
    }
}
