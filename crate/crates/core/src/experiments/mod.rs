//! Phase-transition grids for analysis ℓ1 recovery.
//!
//! Every trial draws its randomness from `hash(master_seed, row, col, trial)`
//! and trials are reduced in index order, so a grid is byte-for-byte the same
//! whatever the thread count or evaluation order.

mod csv;
mod heatmap;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::operator::{build_dif2d, build_gaussian_operator, AnalysisOperator};
use crate::seed::{self, stream};
use crate::sensing::{gen_measurement_matrix, measure, Normalization};
use crate::signal::{gen_gaussian_k1, gen_randomwalk_image};
use crate::solvers::{solve_analysis_l1, L1Options};

pub use csv::{export_csv, parse_csv, to_csv, CsvRow, CsvTable, CSV_HEADER};
pub use heatmap::{colormap, heatmap_svg, render_heatmap};

/// Relative error `‖x̂ − x‖/‖x‖` at or below which a trial counts as a success.
pub const SUCCESS_REL_ERR: f64 = 1e-3;

/// Random-walk attempts evaluated together while filling a cosparsity bin.
const POOL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YAxis {
    /// `ρ = p/d`.
    Rho,
    /// Centre of a cosparsity bin.
    Cosparsity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    /// Squared error divided by `‖x‖²`.
    pub mse_mean: f64,
    pub mse_median: f64,
    /// Squared error `‖x̂ − x‖²` before normalization.
    pub raw_mean: f64,
    pub raw_median: f64,
    pub trials: usize,
    /// Trials whose solver hit the iteration cap (recorded with the last iterate).
    pub failures: usize,
    /// Trials that could not draw a signal.
    pub gen_failures: usize,
    /// Trials with relative error at most `SUCCESS_REL_ERR`.
    pub successes: usize,
}

impl CellStats {
    fn empty(gen_failures: usize) -> Self {
        CellStats {
            mse_mean: f64::NAN,
            mse_median: f64::NAN,
            raw_mean: f64::NAN,
            raw_median: f64::NAN,
            trials: 0,
            failures: 0,
            gen_failures,
            successes: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.trials == 0
    }

    pub fn success_rate(&self) -> f64 {
        if self.trials == 0 {
            f64::NAN
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGridResult {
    /// `δ = m/d` per column.
    pub x_axis: Vec<f64>,
    pub y_axis: Vec<f64>,
    pub y_kind: YAxis,
    /// Row-major: `cells[row][col]` pairs `y_axis[row]` with `x_axis[col]`.
    pub cells: Vec<Vec<CellStats>>,
    /// Settings echoed into every export, in a fixed order.
    pub meta: Vec<(String, String)>,
}

impl PhaseGridResult {
    pub fn cell(&self, row: usize, col: usize) -> &CellStats {
        &self.cells[row][col]
    }
}

/// Inclusive cosparsity range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CosparsityBin {
    pub lo: usize,
    pub hi: usize,
}

impl CosparsityBin {
    pub fn contains(&self, c: usize) -> bool {
        self.lo <= c && c <= self.hi
    }

    pub fn center(&self) -> f64 {
        (self.lo + self.hi) as f64 / 2.0
    }
}

struct Trial {
    raw: f64,
    rel: f64,
    converged: bool,
}

fn round_count(frac: f64, d: usize, what: &str) -> Result<usize> {
    let v = (frac * d as f64).round();
    if !(v >= 1.0) || !v.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "{what} = {frac} gives a non-positive count at d = {d}"
        )));
    }
    Ok(v as usize)
}

fn aggregate(outcomes: Vec<Option<Trial>>) -> CellStats {
    let gen_failures = outcomes.iter().filter(|o| o.is_none()).count();
    let trials: Vec<Trial> = outcomes.into_iter().flatten().collect();
    if trials.is_empty() {
        return CellStats::empty(gen_failures);
    }
    let n = trials.len() as f64;
    let mut rel: Vec<f64> = trials.iter().map(|t| t.rel).collect();
    let mut raw: Vec<f64> = trials.iter().map(|t| t.raw).collect();
    let mse_mean = rel.iter().sum::<f64>() / n;
    let raw_mean = raw.iter().sum::<f64>() / n;
    CellStats {
        mse_mean,
        mse_median: median(&mut rel),
        raw_mean,
        raw_median: median(&mut raw),
        trials: trials.len(),
        failures: trials.iter().filter(|t| !t.converged).count(),
        gen_failures,
        successes: trials.iter().filter(|t| t.rel.sqrt() <= SUCCESS_REL_ERR).count(),
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        (xs[k / 2 - 1] + xs[k / 2]) / 2.0
    }
}

fn recover(
    omega: &AnalysisOperator,
    x: &DVector<f64>,
    m: usize,
    sigma: f64,
    trial_seed: u64,
    opts: &L1Options,
) -> Result<Trial> {
    let d = x.len();
    let a = gen_measurement_matrix(
        m,
        d,
        Normalization::UnitColumns,
        seed::derive(trial_seed, &[stream::MATRIX]),
    )?;
    let y = measure(&a, x, sigma, seed::derive(trial_seed, &[stream::NOISE]))?;
    let rep = solve_analysis_l1(&a, omega, &y, sigma, opts)?;
    let raw = (&rep.x_hat - x).norm_squared();
    Ok(Trial {
        raw,
        rel: raw / x.norm_squared(),
        converged: rep.converged,
    })
}

fn solver_meta(meta: &mut Vec<(String, String)>, opts: &L1Options) {
    for (k, v) in [
        ("l1.tol", opts.tol.to_string()),
        ("l1.max_iter", opts.max_iter.to_string()),
        ("l1.rho", opts.rho.to_string()),
        ("l1.equilibrate", opts.equilibrate.to_string()),
        ("measurement", Normalization::UnitColumns.to_string()),
        ("color_scale", "log".to_string()),
    ] {
        meta.push((k.to_string(), v));
    }
}

fn check_common(deltas: &[f64], sigma: f64, trials: usize) -> Result<()> {
    if deltas.is_empty() || trials == 0 {
        return Err(Error::InvalidArgument(
            "grid needs at least one delta and one trial".into(),
        ));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok(())
}

/// Gaussian-Ω grid: each trial draws a fresh operator, a fresh unit-norm `K₁`
/// signal and a fresh unit-column `A`, then solves analysis ℓ1.
pub fn phase_grid_gaussian(
    d: usize,
    rho_list: &[f64],
    delta_list: &[f64],
    sigma: f64,
    trials: usize,
    master_seed: u64,
    opts: &L1Options,
) -> Result<PhaseGridResult> {
    check_common(delta_list, sigma, trials)?;
    if d < 2 || rho_list.is_empty() {
        return Err(Error::InvalidArgument("need d >= 2 and at least one rho".into()));
    }
    let ms = delta_list
        .iter()
        .map(|&dl| round_count(dl, d, "delta"))
        .collect::<Result<Vec<_>>>()?;
    let ps = rho_list
        .iter()
        .map(|&r| round_count(r, d, "rho"))
        .collect::<Result<Vec<_>>>()?;
    if let Some(&p) = ps.iter().find(|&&p| p + 1 < d) {
        return Err(Error::InvalidArgument(format!(
            "K1 signals need p >= d - 1, got p = {p}"
        )));
    }

    let (rows, cols) = (ps.len(), ms.len());
    let outcomes = (0..rows * cols * trials)
        .into_par_iter()
        .map(|k| {
            let (r, c, t) = (k / (cols * trials), (k / trials) % cols, k % trials);
            let s = seed::derive(master_seed, &[r as u64, c as u64, t as u64]);
            let omega = build_gaussian_operator(ps[r], d, seed::derive(s, &[stream::OPERATOR]))?;
            let x = match gen_gaussian_k1(&omega, seed::derive(s, &[stream::SIGNAL])) {
                Ok(sig) => sig.x,
                Err(Error::DegenerateOperator { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            recover(&omega, &x, ms[c], sigma, s, opts).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;

    let cells = reduce_cells(outcomes, rows, cols, trials);
    let mut meta = vec![
        ("model".to_string(), "gaussian".to_string()),
        ("d".to_string(), d.to_string()),
        ("sigma".to_string(), sigma.to_string()),
        ("trials".to_string(), trials.to_string()),
        ("master_seed".to_string(), master_seed.to_string()),
    ];
    solver_meta(&mut meta, opts);
    Ok(PhaseGridResult {
        x_axis: delta_list.to_vec(),
        y_axis: rho_list.to_vec(),
        y_kind: YAxis::Rho,
        cells,
        meta,
    })
}

fn reduce_cells(outcomes: Vec<Option<Trial>>, rows: usize, cols: usize, trials: usize) -> Vec<Vec<CellStats>> {
    let mut it = outcomes.into_iter();
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| aggregate(it.by_ref().take(trials).collect()))
                .collect()
        })
        .collect()
}

/// Draw random-walk images in seed order until `trials` of them fall in
/// `bin` or `budget` attempts are spent. `None` if the bin cannot be filled.
fn fill_bin(
    n: usize,
    bin: CosparsityBin,
    trials: usize,
    budget: usize,
    pool_seed: u64,
) -> Result<Option<Vec<DVector<f64>>>> {
    let mut pool = Vec::with_capacity(trials);
    let mut start = 0;
    while start < budget {
        let end = (start + POOL_CHUNK).min(budget);
        let chunk = (start..end)
            .into_par_iter()
            .map(
                |k| match gen_randomwalk_image(n, seed::derive(pool_seed, &[k as u64]), 0) {
                    Ok(sig) if bin.contains(sig.cosupport.cosparsity()) => Ok(Some(sig.x)),
                    Ok(_) | Err(Error::GenerationFailure { .. }) => Ok(None),
                    Err(e) => Err(e),
                },
            )
            .collect::<Result<Vec<_>>>()?;
        for x in chunk.into_iter().flatten() {
            pool.push(x);
            if pool.len() == trials {
                return Ok(Some(pool));
            }
        }
        start = end;
    }
    Ok(None)
}

/// 2D-DIF grid over cosparsity bins. Each bin row reuses one pool of
/// accepted images across its δ columns; errors are normalized by `‖x‖²`.
/// A bin that cannot be filled within `gen_budget` attempts is left empty.
#[allow(clippy::too_many_arguments)]
pub fn phase_grid_dif(
    n: usize,
    bins: &[CosparsityBin],
    delta_list: &[f64],
    sigma: f64,
    trials: usize,
    master_seed: u64,
    opts: &L1Options,
    gen_budget: usize,
) -> Result<PhaseGridResult> {
    check_common(delta_list, sigma, trials)?;
    if n < 6 || bins.is_empty() {
        return Err(Error::InvalidArgument("need n >= 6 and at least one bin".into()));
    }
    if let Some(b) = bins.iter().find(|b| b.lo > b.hi) {
        return Err(Error::InvalidArgument(format!("empty bin {}..{}", b.lo, b.hi)));
    }
    let d = n * n;
    let ms = delta_list
        .iter()
        .map(|&dl| round_count(dl, d, "delta"))
        .collect::<Result<Vec<_>>>()?;
    let omega = build_dif2d(n)?;

    let pools = bins
        .iter()
        .enumerate()
        .map(|(r, &bin)| {
            let pool_seed = seed::derive(master_seed, &[stream::POOL, r as u64]);
            fill_bin(n, bin, trials, gen_budget, pool_seed)
        })
        .collect::<Result<Vec<_>>>()?;

    let cols = ms.len();
    let jobs: Vec<(usize, usize, usize)> = pools
        .iter()
        .enumerate()
        .filter_map(|(r, p)| p.as_ref().map(|_| r))
        .flat_map(|r| (0..cols).flat_map(move |c| (0..trials).map(move |t| (r, c, t))))
        .collect();
    let mut outcomes = jobs
        .par_iter()
        .map(|&(r, c, t)| {
            let x = &pools[r].as_ref().expect("filtered to filled bins")[t];
            let s = seed::derive(master_seed, &[r as u64, c as u64, t as u64]);
            recover(&omega, x, ms[c], sigma, s, opts).map(Some)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter();

    let cells = pools
        .iter()
        .map(|pool| {
            (0..cols)
                .map(|_| match pool {
                    Some(_) => aggregate(outcomes.by_ref().take(trials).collect()),
                    None => CellStats::empty(trials),
                })
                .collect()
        })
        .collect();

    let mut meta = vec![
        ("model".to_string(), "dif2d".to_string()),
        ("n".to_string(), n.to_string()),
        ("sigma".to_string(), sigma.to_string()),
        ("trials".to_string(), trials.to_string()),
        ("master_seed".to_string(), master_seed.to_string()),
        ("gen_budget".to_string(), gen_budget.to_string()),
    ];
    for (i, b) in bins.iter().enumerate() {
        meta.push((format!("bin.{i}"), format!("{}..{}", b.lo, b.hi)));
    }
    solver_meta(&mut meta, opts);
    Ok(PhaseGridResult {
        x_axis: delta_list.to_vec(),
        y_axis: bins.iter().map(CosparsityBin::center).collect(),
        y_kind: YAxis::Cosparsity,
        cells,
        meta,
    })
}

/// Cosparsities of `images` accepted random-walk images (one attempt per
/// seed; rejected attempts are skipped, not retried).
pub fn pilot_cosparsities(n: usize, images: usize, seed: u64) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(images);
    let mut start = 0u64;
    while out.len() < images {
        let batch = (start..start + POOL_CHUNK as u64)
            .into_par_iter()
            .map(
                |k| match gen_randomwalk_image(n, seed::derive(seed, &[stream::PILOT, k]), 0) {
                    Ok(sig) => Ok(Some(sig.cosupport.cosparsity())),
                    Err(Error::GenerationFailure { .. }) => Ok(None),
                    Err(e) => Err(e),
                },
            )
            .collect::<Result<Vec<_>>>()?;
        out.extend(batch.into_iter().flatten().take(images - out.len()));
        start += POOL_CHUNK as u64;
    }
    Ok(out)
}

/// `count` equal-width bins over `[min, max]` of the observed cosparsities.
/// Cosparsities of these images are always even, so edges are placed on
/// the even lattice and every bin holds at least one attainable value.
pub fn equal_width_bins(observed: &[usize], count: usize) -> Result<Vec<CosparsityBin>> {
    let (&lo, &hi) = match (observed.iter().min(), observed.iter().max()) {
        (Some(lo), Some(hi)) if count > 0 => (lo, hi),
        _ => return Err(Error::InvalidArgument("need observations and at least one bin".into())),
    };
    let steps = (hi - lo) / 2 + 1;
    if count > steps {
        return Err(Error::InvalidArgument(format!(
            "{count} bins requested but only {steps} distinct cosparsity levels observed"
        )));
    }
    Ok((0..count)
        .map(|i| CosparsityBin {
            lo: lo + 2 * (i * steps / count),
            hi: lo + 2 * ((i + 1) * steps / count) - 2 + 1,
        })
        .collect())
}

/// Bins from a pilot run of `images` random-walk images.
pub fn pilot_bins(n: usize, images: usize, count: usize, seed: u64) -> Result<Vec<CosparsityBin>> {
    equal_width_bins(&pilot_cosparsities(n, images, seed)?, count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridModel {
    Gaussian { d: usize },
    Dif2d { n: usize },
}

/// Fully resolved settings for one grid run.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    pub model: GridModel,
    pub sigma: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub deltas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub bins: usize,
    pub pilot_images: usize,
    pub gen_budget: usize,
    pub l1: L1Options,
}

pub const DEFAULT_DELTAS: &[f64] = &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
pub const DEFAULT_RHOS: &[f64] = &[1.0, 1.5, 2.0, 2.5, 3.0];

impl PhaseConfig {
    /// Desk-scale defaults (d = 50, n = 12, 50 trials), or d = 200 with 500
    /// trials under `paper_scale`, overridden by any keys set in `cfg`.
    pub fn from_config(cfg: &Config, paper_scale: bool) -> Result<Self> {
        let (d_default, trials_default) = if paper_scale { (200, 500) } else { (50, 50) };
        let model = match cfg.get("model").unwrap_or("gaussian") {
            "gaussian" => GridModel::Gaussian {
                d: cfg.usize_or("d", d_default)?,
            },
            "dif2d" => GridModel::Dif2d {
                n: cfg.usize_or("n", 12)?,
            },
            other => return Err(Error::InvalidArgument(format!("unknown grid model {other:?}"))),
        };
        Ok(PhaseConfig {
            model,
            sigma: cfg.f64_or("sigma", 0.0)?,
            trials: cfg.usize_or("trials", trials_default)?,
            master_seed: cfg.u64_or("seed", 0)?,
            deltas: cfg.list_or("delta", DEFAULT_DELTAS)?,
            rhos: cfg.list_or("rho", DEFAULT_RHOS)?,
            bins: cfg.usize_or("bins", 5)?,
            pilot_images: cfg.usize_or("pilot_images", 1000)?,
            gen_budget: cfg.usize_or("gen_budget", 100_000)?,
            l1: cfg.l1_options()?,
        })
    }

    pub fn run(&self) -> Result<PhaseGridResult> {
        match self.model {
            GridModel::Gaussian { d } => phase_grid_gaussian(
                d,
                &self.rhos,
                &self.deltas,
                self.sigma,
                self.trials,
                self.master_seed,
                &self.l1,
            ),
            GridModel::Dif2d { n } => {
                let pilot_seed = seed::derive(self.master_seed, &[stream::PILOT]);
                let bins = pilot_bins(n, self.pilot_images, self.bins, pilot_seed)?;
                let mut res = phase_grid_dif(
                    n,
                    &bins,
                    &self.deltas,
                    self.sigma,
                    self.trials,
                    self.master_seed,
                    &self.l1,
                    self.gen_budget,
                )?;
                res.meta.push(("pilot_images".into(), self.pilot_images.to_string()));
                Ok(res)
            }
        }
    }
}
