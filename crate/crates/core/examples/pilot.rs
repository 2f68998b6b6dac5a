//! Pilot runs behind the recovery thresholds used by the acceptance suite.
//! Writes one CSV per grid into the directory given as the first argument
//! (default `pilot/`). The first three files are exactly the grids the
//! acceptance suite recomputes; `dif2d_delta_sweep.csv` shows where the
//! cosparsity bins separate.

use std::path::PathBuf;

use cosparse::experiments::{export_csv, phase_grid_dif, phase_grid_gaussian, pilot_bins, PhaseGridResult};
use cosparse::solvers::L1Options;

const SEED: u64 = 2024;

fn summary(name: &str, g: &PhaseGridResult) {
    for (r, row) in g.cells.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            println!(
                "{name}: y={} delta={} mse_mean={:.3e} mse_median={:.3e} successes={}/{} failures={}",
                g.y_axis[r], g.x_axis[c], cell.mse_mean, cell.mse_median, cell.successes, cell.trials, cell.failures
            );
        }
    }
}

fn main() -> cosparse::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "pilot".into()));
    std::fs::create_dir_all(&dir)?;
    let opts = L1Options::default();
    let bins = pilot_bins(12, 1000, 5, SEED)?;

    let grids = [
        (
            "gaussian_rho1.csv",
            phase_grid_gaussian(50, &[1.0], &[0.2], 0.0, 50, SEED, &opts)?,
        ),
        (
            "gaussian_rho3_noisy.csv",
            phase_grid_gaussian(50, &[3.0], &[0.3, 0.5, 0.7, 0.9], 0.01, 50, SEED, &opts)?,
        ),
        (
            "dif2d_delta04.csv",
            phase_grid_dif(12, &bins, &[0.4], 0.0, 50, SEED, &opts, 100_000)?,
        ),
        (
            "dif2d_delta_sweep.csv",
            phase_grid_dif(
                12,
                &bins,
                &[0.05, 0.1, 0.15, 0.2, 0.3, 0.4],
                0.0,
                50,
                SEED,
                &opts,
                100_000,
            )?,
        ),
    ];
    for (name, g) in &grids {
        export_csv(g, &dir.join(name))?;
        summary(name, g);
    }
    Ok(())
}
