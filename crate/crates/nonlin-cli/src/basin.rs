//! Basin-of-attraction maps.
//!
//! One solver run per grid cell, started from the cell centre. A cell counts
//! towards coverage only when the run converges onto one of the system's
//! known roots; runs that satisfy a tolerance somewhere else (false roots of
//! near-flat regions, stalled steps) keep their own status code and are
//! excluded, matching how the benchmark coverage percentages are defined.

use crate::config::{BasinConfig, RootMethod};
use nonlin::numkit::{norm2, RngSeed, SplitMix64};
use nonlin::problems::Benchmark;
use nonlin::rootfind::{
    diagonal_secant, enr_solve, newton_raphson, SolveStatus, Tolerances, VectorSystem,
};

pub const STATUS_MAX_ITERS: i32 = -1;
pub const STATUS_DIVERGED: i32 = -2;
pub const STATUS_UNMATCHED: i32 = -3;

/// Euclidean radius within which a converged iterate is matched to a known
/// root.
pub const ROOT_MATCH_RADIUS: f64 = 1e-2;

/// Per-cell outcome of a basin map.
#[derive(Debug, Clone)]
pub struct BasinGrid {
    pub x0_range: [f64; 2],
    pub x1_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    /// `k >= 0`: converged onto known root `k`; `-1` iteration cap; `-2`
    /// diverged; `-3` converged away from every known root.
    pub status: Vec<i32>,
    pub iters: Vec<u32>,
}

impl BasinGrid {
    pub fn cell_centre(&self, ix: usize, iy: usize) -> (f64, f64) {
        let x0 = self.x0_range[0]
            + (self.x0_range[1] - self.x0_range[0]) * (ix as f64 + 0.5) / self.nx as f64;
        let x1 = self.x1_range[0]
            + (self.x1_range[1] - self.x1_range[0]) * (iy as f64 + 0.5) / self.ny as f64;
        (x0, x1)
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }
}

/// Aggregates of one basin map.
#[derive(Debug, Clone)]
pub struct GridReport {
    /// Share of cells that converged onto a known root, in percent.
    pub coverage_percent: f64,
    pub per_root_cells: Vec<usize>,
    pub unmatched_cells: usize,
    pub max_iter_cells: usize,
    pub diverged_cells: usize,
    /// Mean iteration count over the covered cells.
    pub mean_iterations: f64,
}

fn classify(
    system: &Benchmark,
    status: SolveStatus,
    final_iterate: &[f64],
) -> i32 {
    match status {
        SolveStatus::MaxItersExceeded => STATUS_MAX_ITERS,
        SolveStatus::Diverged(_) => STATUS_DIVERGED,
        SolveStatus::Converged => {
            let nearest = system
                .known_roots
                .iter()
                .enumerate()
                .map(|(k, root)| {
                    let d: Vec<f64> =
                        final_iterate.iter().zip(root).map(|(a, b)| a - b).collect();
                    (k, norm2(&d))
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            match nearest {
                Some((k, dist)) if dist <= ROOT_MATCH_RADIUS => k as i32,
                _ => STATUS_UNMATCHED,
            }
        }
    }
}

struct CellRunner<'a> {
    system: &'a Benchmark,
    method: RootMethod,
    policy: Option<nonlin::rootfind::CPolicy>,
    tol: Tolerances,
    seed: RngSeed,
    x0_range: [f64; 2],
    x1_range: [f64; 2],
}

impl CellRunner<'_> {
    fn run(&self, x0: f64, x1: f64, cell: u64) -> (i32, u32) {
        let guess = [x0, x1];
        let trace = match self.method {
            RootMethod::Nr => newton_raphson(self.system, &guess, &self.tol),
            RootMethod::Enr => enr_solve(
                self.system,
                &guess,
                self.policy.as_ref().expect("validated: enr has a policy"),
                &self.tol,
            ),
            RootMethod::Ds => {
                // Second guess drawn per cell; redrawn if a component
                // coincides with the first guess.
                let mut rng = SplitMix64::from_seed(self.seed.derive(cell));
                loop {
                    let second = [
                        rng.next_in(self.x0_range[0], self.x0_range[1]),
                        rng.next_in(self.x1_range[0], self.x1_range[1]),
                    ];
                    match diagonal_secant(self.system, &guess, &second, &self.tol) {
                        Ok(trace) => break trace,
                        Err(_) => continue,
                    }
                }
            }
        };
        (
            classify(self.system, trace.status, trace.final_iterate()),
            trace.iterations() as u32,
        )
    }
}

/// Runs the basin map with a chosen number of worker threads. Results are
/// identical for any thread count: every cell is an independent solve keyed
/// only by its own coordinates and derived seed.
pub fn basin_map_with_parallelism(
    system: &Benchmark,
    cfg: &BasinConfig,
    seed: u64,
    threads: usize,
) -> (BasinGrid, GridReport) {
    let tol = match &cfg.tolerances {
        Some(spec) => spec.to_tolerances().expect("validated tolerances"),
        None => Tolerances::default(),
    };
    let policy = cfg
        .policy
        .as_ref()
        .map(|p| p.to_policy(system.dim()).expect("validated policy"));
    let runner = CellRunner {
        system,
        method: cfg.method,
        policy,
        tol,
        seed: RngSeed(seed),
        x0_range: cfg.range[0],
        x1_range: cfg.range[1],
    };

    let (nx, ny) = (cfg.resolution[0], cfg.resolution[1]);
    let mut grid = BasinGrid {
        x0_range: cfg.range[0],
        x1_range: cfg.range[1],
        nx,
        ny,
        status: vec![0; nx * ny],
        iters: vec![0; nx * ny],
    };

    let workers = threads.max(1);
    let rows_per_chunk = ny.div_ceil(workers);
    {
        let status_chunks = grid.status.chunks_mut(rows_per_chunk * nx);
        let iter_chunks = grid.iters.chunks_mut(rows_per_chunk * nx);
        std::thread::scope(|scope| {
            for (chunk_id, (status_chunk, iter_chunk)) in
                status_chunks.zip(iter_chunks).enumerate()
            {
                let runner = &runner;
                let grid_dims = (nx, ny, cfg.range);
                scope.spawn(move || {
                    let (nx, ny, range) = grid_dims;
                    let row0 = chunk_id * rows_per_chunk;
                    for (local, (s, it)) in
                        status_chunk.iter_mut().zip(iter_chunk.iter_mut()).enumerate()
                    {
                        let iy = row0 + local / nx;
                        let ix = local % nx;
                        let x0 =
                            range[0][0] + (range[0][1] - range[0][0]) * (ix as f64 + 0.5) / nx as f64;
                        let x1 =
                            range[1][0] + (range[1][1] - range[1][0]) * (iy as f64 + 0.5) / ny as f64;
                        let cell = (iy * nx + ix) as u64;
                        let (code, iters) = runner.run(x0, x1, cell);
                        *s = code;
                        *it = iters;
                    }
                });
            }
        });
    }

    let report = summarise(system, &grid);
    (grid, report)
}

/// Runs the basin map using all available cores.
pub fn basin_map(system: &Benchmark, cfg: &BasinConfig, seed: u64) -> (BasinGrid, GridReport) {
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    basin_map_with_parallelism(system, cfg, seed, threads)
}

fn summarise(system: &Benchmark, grid: &BasinGrid) -> GridReport {
    let mut per_root_cells = vec![0usize; system.known_roots.len()];
    let mut unmatched = 0;
    let mut max_iters = 0;
    let mut diverged = 0;
    let mut covered_iters = 0u64;
    for (s, it) in grid.status.iter().zip(&grid.iters) {
        match *s {
            k if k >= 0 => {
                per_root_cells[k as usize] += 1;
                covered_iters += *it as u64;
            }
            STATUS_UNMATCHED => unmatched += 1,
            STATUS_MAX_ITERS => max_iters += 1,
            _ => diverged += 1,
        }
    }
    let covered: usize = per_root_cells.iter().sum();
    let total = grid.status.len();
    GridReport {
        coverage_percent: 100.0 * covered as f64 / total as f64,
        per_root_cells,
        unmatched_cells: unmatched,
        max_iter_cells: max_iters,
        diverged_cells: diverged,
        mean_iterations: if covered > 0 {
            covered_iters as f64 / covered as f64
        } else {
            f64::NAN
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PolicySpec;

    fn cfg(method: RootMethod, policy: Option<PolicySpec>, res: usize) -> BasinConfig {
        BasinConfig {
            problem: "rf5".into(),
            method,
            policy,
            range: [[-50.0, 50.0], [-50.0, 50.0]],
            resolution: [res, res],
            tolerances: None,
            seed: None,
        }
    }

    #[test]
    fn every_cell_is_classified() {
        let sys = nonlin::problems::system_rf5();
        let (grid, report) = basin_map(&sys, &cfg(RootMethod::Nr, None, 24), 0);
        assert_eq!(grid.status.len(), 24 * 24);
        let accounted = report.per_root_cells.iter().sum::<usize>()
            + report.unmatched_cells
            + report.max_iter_cells
            + report.diverged_cells;
        assert_eq!(accounted, 24 * 24);
        let covered: usize = report.per_root_cells.iter().sum();
        assert!(
            (report.coverage_percent - 100.0 * covered as f64 / (24.0 * 24.0)).abs() < 1e-12
        );
    }

    #[test]
    fn parallel_and_serial_grids_agree() {
        let sys = nonlin::problems::system_exp();
        let config = BasinConfig {
            problem: "exp".into(),
            ..cfg(
                RootMethod::Enr,
                Some(PolicySpec::Scalar { phi: 0.5 }),
                20,
            )
        };
        let (serial, _) = basin_map_with_parallelism(&sys, &config, 42, 1);
        let (parallel, _) = basin_map_with_parallelism(&sys, &config, 42, 7);
        assert_eq!(serial.status, parallel.status);
        assert_eq!(serial.iters, parallel.iters);
    }

    #[test]
    fn coverage_stable_under_grid_halving() {
        let sys = nonlin::problems::system_rf5();
        let (_, coarse) = basin_map(&sys, &cfg(RootMethod::Nr, None, 64), 0);
        let (_, fine) = basin_map(&sys, &cfg(RootMethod::Nr, None, 128), 0);
        assert!((coarse.coverage_percent - fine.coverage_percent).abs() < 1.0);
    }
}
