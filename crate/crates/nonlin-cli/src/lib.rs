//! Experiment layer over the `nonlin` solvers.
//!
//! Each module runs one of the benchmark experiments — basin-of-attraction
//! maps, distance×noise fit grids, convergence rate/order reports, the bar
//! forward/inverse cases and the modification-parameter sweeps — and writes
//! CSV (plus PPM for basins). Given the same configuration and seed the
//! outputs are byte-identical regardless of how many threads run the grid
//! cells.

pub mod basin;
pub mod config;
pub mod csvio;
pub mod fem_cases;
pub mod mingrid;
pub mod ppm;
pub mod rate_order;
