//! Command-line runner for the benchmark experiments.
//!
//! Every subcommand reads a JSON configuration (see `configs/` for samples),
//! optionally overridden by `--seed` or the `NONLIN_SEED` environment
//! variable, and writes CSV — plus a PPM image for basin maps — into the
//! `--out` directory. Exit codes: 0 success, 2 configuration or usage error,
//! 3 experiment-level failure (a solve that had to converge but did not, or
//! an output that could not be written).

use clap::{Args, Parser, Subcommand};
use nonlin_cli::basin::{basin_map, BasinGrid, GridReport};
use nonlin_cli::config::{
    self, BasinConfig, ConfigError, FemForwardConfig, FemInverseConfig, MinGridConfig,
    PhiSweepConfig, RateOrderConfig,
};
use nonlin_cli::csvio::{create_csv, fmt_f64};
use nonlin_cli::fem_cases::{run_beam, run_forward, run_inverse, run_phi_sweep};
use nonlin_cli::mingrid::minimisation_grid;
use nonlin_cli::ppm;
use nonlin_cli::rate_order::{rate_order_report, MethodRates};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "nonlin",
    about = "Root-finding and least-squares benchmark experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Seed override (falls back to the config, then NONLIN_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV/PPM files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct BeamArgs {
    /// Output directory for the iteration table.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Basin-of-attraction map over a 2D grid of starting guesses.
    Basin(RunArgs),
    /// Distance × noise grid of fit iteration counts.
    Mingrid(RunArgs),
    /// Convergence rate and order report for both fit methods.
    Rateorder(RunArgs),
    /// Forward bar analysis.
    FemForward(RunArgs),
    /// Inverse constitutive fit.
    FemInverse(RunArgs),
    /// Modification-parameter sweep of the forward bar analysis.
    Phisweep(RunArgs),
    /// Cantilever fit iteration table.
    Beam(BeamArgs),
}

enum RunError {
    Config(String),
    Experiment(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Experiment(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Basin(args) => cmd_basin(args),
        Command::Mingrid(args) => cmd_mingrid(args),
        Command::Rateorder(args) => cmd_rateorder(args),
        Command::FemForward(args) => cmd_fem_forward(args),
        Command::FemInverse(args) => cmd_fem_inverse(args),
        Command::Phisweep(args) => cmd_phisweep(args),
        Command::Beam(args) => cmd_beam(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(RunError::Experiment(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn ensure_out(dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn cmd_basin(args: &RunArgs) -> Result<(), RunError> {
    let cfg: BasinConfig = config::load_config(&args.config)?;
    cfg.validate()?;
    let seed = config::resolve_seed(args.seed, cfg.seed);
    let system = nonlin::problems::system_by_name(&cfg.problem).expect("validated");
    ensure_out(&args.out)?;

    let (grid, report) = basin_map(&system, &cfg, seed);
    write_basin_grid(&args.out.join("grid.csv"), &grid)?;
    write_basin_report(&args.out.join("report.csv"), &report, &cfg, seed)?;
    let max_iters = cfg
        .tolerances
        .as_ref()
        .map(|t| t.max_iters)
        .unwrap_or(100) as u32;
    ppm::write_ppm(&args.out.join("basin.ppm"), &grid, max_iters)?;
    println!(
        "basin {}: coverage {:.2}% over {}x{} cells",
        cfg.problem, report.coverage_percent, grid.nx, grid.ny
    );
    Ok(())
}

fn write_basin_grid(path: &Path, grid: &BasinGrid) -> Result<(), RunError> {
    let mut csv = create_csv(path)?;
    csv.header(&["ix", "iy", "x0", "x1", "status", "iterations"])?;
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let idx = grid.index(ix, iy);
            let (x0, x1) = grid.cell_centre(ix, iy);
            csv.row(&[
                ix.to_string(),
                iy.to_string(),
                fmt_f64(x0),
                fmt_f64(x1),
                grid.status[idx].to_string(),
                grid.iters[idx].to_string(),
            ])?;
        }
    }
    Ok(())
}

fn write_basin_report(
    path: &Path,
    report: &GridReport,
    cfg: &BasinConfig,
    seed: u64,
) -> Result<(), RunError> {
    let mut csv = create_csv(path)?;
    csv.header(&["key", "value"])?;
    csv.row(&["problem".into(), cfg.problem.clone()])?;
    csv.row(&["seed".into(), seed.to_string()])?;
    csv.row(&["coverage_percent".into(), fmt_f64(report.coverage_percent)])?;
    for (k, count) in report.per_root_cells.iter().enumerate() {
        csv.row(&[format!("cells_root_{k}"), count.to_string()])?;
    }
    csv.row(&["cells_unmatched".into(), report.unmatched_cells.to_string()])?;
    csv.row(&["cells_max_iters".into(), report.max_iter_cells.to_string()])?;
    csv.row(&["cells_diverged".into(), report.diverged_cells.to_string()])?;
    csv.row(&["mean_iterations".into(), fmt_f64(report.mean_iterations)])?;
    Ok(())
}

fn cmd_mingrid(args: &RunArgs) -> Result<(), RunError> {
    let cfg: MinGridConfig = config::load_config(&args.config)?;
    cfg.validate()?;
    let seed = config::resolve_seed(args.seed, cfg.seed);
    let entry = nonlin::problems::model_by_name(&cfg.model).expect("validated");
    ensure_out(&args.out)?;

    let grid = minimisation_grid(&entry, &cfg, seed);
    let mut csv = create_csv(&args.out.join("mingrid.csv"))?;
    csv.header(&["distance", "snr_db", "mean_steps", "converged_runs"])?;
    for (j, snr) in grid.snr_values.iter().enumerate() {
        for (i, &distance) in grid.distances.iter().enumerate() {
            let cell = grid.cell(i, j);
            csv.row(&[
                fmt_f64(distance),
                opt(*snr),
                opt(cell.mean_steps),
                cell.converged_runs.to_string(),
            ])?;
        }
    }
    println!(
        "mingrid {}: {} distances x {} noise levels",
        cfg.model,
        grid.distances.len(),
        grid.snr_values.len()
    );
    Ok(())
}

fn cmd_rateorder(args: &RunArgs) -> Result<(), RunError> {
    let cfg: RateOrderConfig = config::load_config(&args.config)?;
    cfg.validate()?;
    let seed = config::resolve_seed(args.seed, cfg.seed);
    let entry = nonlin::problems::model_by_name(&cfg.model).expect("validated");
    ensure_out(&args.out)?;

    let report = rate_order_report(&entry, &cfg, seed);
    let mut csv = create_csv(&args.out.join("rateorder.csv"))?;
    csv.header(&["n", "gn_q", "gn_mu", "cgn_q", "cgn_mu"])?;
    let rows = report.gn.order_q.len().max(report.cgn.order_q.len());
    let at = |v: &[f64], i: usize| v.get(i).copied();
    for i in 0..rows {
        csv.row(&[
            (i + 1).to_string(),
            opt(at(&report.gn.order_q, i)),
            opt(at(&report.gn.rate_mu, i)),
            opt(at(&report.cgn.order_q, i)),
            opt(at(&report.cgn.rate_mu, i)),
        ])?;
    }
    let describe = |m: &MethodRates| format!("{:?} in {} iterations", m.status, m.iterations);
    println!(
        "rateorder {}: gn {} / cgn {}",
        cfg.model,
        describe(&report.gn),
        describe(&report.cgn)
    );
    Ok(())
}

fn cmd_fem_forward(args: &RunArgs) -> Result<(), RunError> {
    let cfg: FemForwardConfig = config::load_config(&args.config)?;
    cfg.validate()?;
    let seed = config::resolve_seed(args.seed, cfg.seed);
    ensure_out(&args.out)?;

    let run = run_forward(&cfg, seed);
    let mut csv = create_csv(&args.out.join("shape.csv"))?;
    csv.header(&["node", "X", "x", "lambda", "P"])?;
    let problem = cfg.problem().expect("validated");
    for (i, (reference, current)) in problem
        .mesh
        .ref_nodes
        .iter()
        .zip(&run.state.cur_nodes)
        .enumerate()
    {
        // Stretch and stress belong to the element left of the node.
        let (lambda, stress) = if i == 0 {
            (None, None)
        } else {
            (
                Some(run.state.stretches[i - 1]),
                Some(run.state.stresses[i - 1]),
            )
        };
        csv.row(&[
            i.to_string(),
            fmt_f64(*reference),
            fmt_f64(*current),
            opt(lambda),
            opt(stress),
        ])?;
    }
    let mut summary = create_csv(&args.out.join("summary.csv"))?;
    summary.header(&["key", "value"])?;
    summary.row(&["status".into(), format!("{:?}", run.trace.status)])?;
    summary.row(&["iterations".into(), run.trace.iterations().to_string()])?;
    summary.row(&["total_length".into(), fmt_f64(run.total_length())])?;
    summary.row(&[
        "elongation_percent".into(),
        fmt_f64(run.elongation_percent(cfg.length)),
    ])?;
    println!(
        "fem-forward: {:?} in {} iterations, total length {}",
        run.trace.status,
        run.trace.iterations(),
        fmt_f64(run.total_length())
    );
    if !run.converged() {
        return Err(RunError::Experiment(
            "forward analysis did not reach equilibrium".into(),
        ));
    }
    Ok(())
}

fn cmd_fem_inverse(args: &RunArgs) -> Result<(), RunError> {
    let cfg: FemInverseConfig = config::load_config(&args.config)?;
    cfg.validate()?;
    let seed = config::resolve_seed(args.seed, cfg.seed);
    ensure_out(&args.out)?;

    let run = run_inverse(&cfg, seed);
    for (name, trace) in [("gn_fit.csv", &run.gn), ("cgn_fit.csv", &run.cgn)] {
        let mut csv = create_csv(&args.out.join(name))?;
        let mut header = vec!["iteration".to_string()];
        header.extend((0..cfg.true_params.len()).map(|i| format!("theta_{i}")));
        header.push("sse".to_string());
        csv.row(&header)?;
        for (k, (theta, sse)) in trace.iterates.iter().zip(&trace.sse).enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(theta.iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(*sse));
            csv.row(&row)?;
        }
    }
    let mut summary = create_csv(&args.out.join("summary.csv"))?;
    summary.header(&["key", "value"])?;
    summary.row(&["family".into(), cfg.family.family().name().to_string()])?;
    summary.row(&["gn_status".into(), format!("{:?}", run.gn.status)])?;
    summary.row(&["gn_iterations".into(), run.gn.iterations().to_string()])?;
    summary.row(&["cgn_status".into(), format!("{:?}", run.cgn.status)])?;
    summary.row(&["cgn_iterations".into(), run.cgn.iterations().to_string()])?;
    for (i, v) in run.gn.final_params().iter().enumerate() {
        summary.row(&[format!("gn_theta_{i}"), fmt_f64(*v)])?;
    }
    for (i, v) in run.cgn.final_params().iter().enumerate() {
        summary.row(&[format!("cgn_theta_{i}"), fmt_f64(*v)])?;
    }
    println!(
        "fem-inverse {}: gn {:?}/{} cgn {:?}/{}",
        cfg.family.family().name(),
        run.gn.status,
        run.gn.iterations(),
        run.cgn.status,
        run.cgn.iterations()
    );
    Ok(())
}

fn cmd_phisweep(args: &RunArgs) -> Result<(), RunError> {
    let cfg: PhiSweepConfig = config::load_config(&args.config)?;
    cfg.validate()?;
    let seed = config::resolve_seed(args.seed, cfg.seed);
    ensure_out(&args.out)?;

    let entries = run_phi_sweep(&cfg, seed);
    let mut csv = create_csv(&args.out.join("phisweep.csv"))?;
    csv.header(&["phi", "converged", "iterations"])?;
    for entry in &entries {
        csv.row(&[
            fmt_f64(entry.phi),
            entry.converged.to_string(),
            entry.iterations.to_string(),
        ])?;
    }
    let converged = entries.iter().filter(|e| e.converged).count();
    println!("phisweep: {converged}/{} values converged", entries.len());
    Ok(())
}

fn cmd_beam(args: &BeamArgs) -> Result<(), RunError> {
    ensure_out(&args.out)?;
    let run = run_beam();
    let mut csv = create_csv(&args.out.join("beam.csv"))?;
    csv.header(&["iteration", "theta", "delta_theta"])?;
    for row in &run.rows {
        csv.row(&[
            row.iteration.to_string(),
            fmt_f64(row.theta),
            fmt_f64(row.delta_theta),
        ])?;
    }
    println!(
        "beam: {:?} in {} iterations, theta = {}",
        run.trace.status,
        run.trace.iterations(),
        fmt_f64(run.trace.final_params()[0])
    );
    if !run.trace.converged() {
        return Err(RunError::Experiment("beam fit did not converge".into()));
    }
    Ok(())
}
