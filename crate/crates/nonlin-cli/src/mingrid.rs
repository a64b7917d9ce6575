//! Distance × noise fit grids.
//!
//! Each cell generates observations at its noise level, draws three starting
//! guesses at its distance from the generating parameters (one Latin
//! hypercube draw of directions), runs the configured fit on each and stores
//! the mean iteration count. A cell only carries a mean when all three
//! repetitions converged. Cell seeds are derived from the grid seed and the
//! cell index, so evaluation order cannot change results.

use crate::config::{FitMethod, MinGridConfig};
use nonlin::minimize::{
    corrected_gauss_newton, gauss_newton, generate_observations, initial_guesses_at_distance,
};
use nonlin::numkit::RngSeed;
use nonlin::problems::ModelEntry;
use nonlin::rootfind::Tolerances;

pub const REPETITIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOutcome {
    /// Mean steps over the three repetitions; `None` when any repetition
    /// failed to converge.
    pub mean_steps: Option<f64>,
    pub converged_runs: usize,
}

#[derive(Debug, Clone)]
pub struct DistanceNoiseGrid {
    pub distances: Vec<f64>,
    pub snr_values: Vec<Option<f64>>,
    /// Row-major: `cells[snr_index * distances.len() + distance_index]`.
    pub cells: Vec<CellOutcome>,
}

impl DistanceNoiseGrid {
    pub fn cell(&self, distance_index: usize, snr_index: usize) -> CellOutcome {
        self.cells[snr_index * self.distances.len() + distance_index]
    }
}

/// Step tolerance used by the grid experiments: `t_r = 1e-6` with a small
/// residual floor so exact fits (noiseless linear models) stop after their
/// first productive step, capped at 100 iterations.
pub fn grid_tolerances() -> Tolerances {
    Tolerances::new(1e-6, 1e-6, 100)
}

pub fn minimisation_grid(entry: &ModelEntry, cfg: &MinGridConfig, seed: u64) -> DistanceNoiseGrid {
    let model = entry.model.as_ref();
    let star = model.true_params().expect("registry models carry θ*");
    let tol = grid_tolerances();
    let distances = cfg.distances.values();
    let base = RngSeed(seed);

    let mut cells = Vec::with_capacity(distances.len() * cfg.snr_db.len());
    for (j, snr) in cfg.snr_db.iter().enumerate() {
        for (i, &distance) in distances.iter().enumerate() {
            let cell_seed = base.derive((j * distances.len() + i) as u64);
            let obs =
                generate_observations(model, &entry.sampling_range, cfg.observations, *snr, cell_seed);
            let guesses = initial_guesses_at_distance(
                &star,
                distance,
                REPETITIONS,
                cell_seed.derive(0x6E55),
            );
            let mut converged_runs = 0;
            let mut total_steps = 0usize;
            for guess in &guesses {
                let trace = match cfg.method {
                    FitMethod::Gn => gauss_newton(model, &obs, guess, &tol),
                    FitMethod::Cgn => corrected_gauss_newton(model, &obs, guess, &tol),
                };
                if trace.converged() {
                    converged_runs += 1;
                    total_steps += trace.iterations();
                }
            }
            cells.push(CellOutcome {
                mean_steps: (converged_runs == REPETITIONS)
                    .then(|| total_steps as f64 / REPETITIONS as f64),
                converged_runs,
            });
        }
    }
    DistanceNoiseGrid {
        distances,
        snr_values: cfg.snr_db.clone(),
        cells,
    }
}
