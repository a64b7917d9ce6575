//! Newton-type solvers for nonlinear systems and least squares, together with
//! the benchmark problems and the 1D hyperelastic finite-element models used
//! to exercise them.
//!
//! The crate is organised in five layers:
//!
//! * [`numkit`] — self-contained dense linear algebra (LU solve, Jacobi SVD,
//!   Moore-Penrose pseudoinverse, rank) and deterministic Latin hypercube
//!   sampling.
//! * [`rootfind`] — Newton-Raphson, the extended variant built on the
//!   nonlinearity-reducing modification `q_ij = (x_i - c_i) F_j / (F_j - F_j(c))`,
//!   a componentwise diagonal secant, and convergence rate/order estimation.
//! * [`minimize`] — Gauss-Newton and its second-order corrected variant for
//!   nonlinear least squares, plus synthetic observation generation.
//! * [`problems`] — the registry of benchmark systems and fit models with
//!   analytic derivatives and known roots/parameters.
//! * [`fem1d`] — a total-Lagrangian bar discretisation with linear-elastic,
//!   Mooney-Rivlin and Veronda-Westmann constitutive laws, wired into the
//!   solvers above for forward and inverse analyses.
//!
//! All solvers are pure functions of their inputs and every random draw is
//! keyed by an explicit seed, so results are reproducible regardless of the
//! degree of parallelism in the caller.

pub mod fem1d;
pub mod minimize;
pub mod numkit;
pub mod problems;
pub mod rootfind;
