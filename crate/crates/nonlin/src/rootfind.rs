//! Newton-type root finding with uniform tracing and termination.
//!
//! Three methods share one iteration driver: plain Newton-Raphson, the
//! extended Newton-Raphson (ENR) built on the nonlinearity-reducing
//! modification
//!
//! ```text
//! q_ij(x, c) = (x_i - c_i) * F_j(x) / (F_j(x) - F_j(c))
//! ```
//!
//! whose flattened derivative `w_Lk` (with `L = N(i-1) + j`) is inverted with
//! a Moore-Penrose pseudoinverse, and an exploratory componentwise diagonal
//! secant. Convergence is declared either on the residual norm of the
//! *original* system or on the step norm; both tolerances are carried by
//! [`Tolerances`].

use crate::numkit::{self, Matrix, RngSeed, SplitMix64};

/// Iteration-level failure raised while evaluating a system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemError {
    /// The point lies on an excluded set (for example a coordinate axis for
    /// systems with `1/x` terms).
    ZeroDivision,
    /// An element stretch left the admissible range of a material law.
    NonPositiveStretch,
}

/// A vector-valued system `F(x)` with an optionally analytic Jacobian.
///
/// The default Jacobian is a central finite difference with step
/// `1e-6 * (1 + |x_k|)` per coordinate.
pub trait VectorSystem {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>, SystemError>;

    fn jacobian(&self, x: &[f64]) -> Result<Matrix, SystemError> {
        fd_jacobian(self, x)
    }
}

/// Central finite-difference Jacobian, `J[j][k] = dF_j/dx_k`.
pub fn fd_jacobian<S: VectorSystem + ?Sized>(
    system: &S,
    x: &[f64],
) -> Result<Matrix, SystemError> {
    let n = system.dim();
    let mut jac = Matrix::zeros(n, n);
    let mut probe = x.to_vec();
    for k in 0..n {
        let h = 1e-6 * (1.0 + x[k].abs());
        probe[k] = x[k] + h;
        let fp = system.eval(&probe)?;
        probe[k] = x[k] - h;
        let fm = system.eval(&probe)?;
        probe[k] = x[k];
        for j in 0..n {
            jac[(j, k)] = (fp[j] - fm[j]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Termination thresholds shared by every solver in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Step-norm tolerance `t_r` on `‖Δx‖`.
    pub rel_step: f64,
    /// Residual-norm tolerance `t_a` on `‖F(x)‖`.
    pub abs_residual: f64,
    pub max_iters: usize,
    /// Scale factor for the modification denominators: `|F_j(x) - F_j(c)|`
    /// below `denom_guard * (1 + |F_j(x)|)` raises a singular modification.
    pub denom_guard: f64,
}

impl Tolerances {
    pub fn new(rel_step: f64, abs_residual: f64, max_iters: usize) -> Tolerances {
        assert!(rel_step > 0.0 && abs_residual > 0.0 && max_iters >= 1);
        Tolerances {
            rel_step,
            abs_residual,
            max_iters,
            denom_guard: 1e-12,
        }
    }
}

impl Default for Tolerances {
    /// The benchmark configuration: `t_r = 1e-6`, `t_a = 0.001414`
    /// (the norm of a per-component 0.001 success margin in 2D), 100
    /// iterations.
    fn default() -> Tolerances {
        Tolerances::new(1e-6, 0.001414, 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceCause {
    /// An iterate, residual or step stopped being finite.
    Overflow,
    /// A linear solve met a singular matrix, or the system itself signalled a
    /// division by zero.
    ZeroDivision,
    /// The modification denominators `F_j(x) - F_j(c)` collapsed.
    SingularModification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxItersExceeded,
    Diverged(DivergenceCause),
}

/// Full history of one solver run.
///
/// `iterates` holds `x⁽⁰⁾ … x⁽ⁿ⁾`, `steps` the applied updates (one fewer
/// entry), `residual_norms` the `‖F‖` value at each iterate. A final step that
/// already satisfied the step tolerance is counted by [`SolveTrace::iterations`]
/// but not applied, so the trace never ends in a redundant micro-update.
#[derive(Debug, Clone)]
pub struct SolveTrace {
    pub iterates: Vec<Vec<f64>>,
    pub steps: Vec<Vec<f64>>,
    pub residual_norms: Vec<f64>,
    pub status: SolveStatus,
    solves: usize,
}

impl SolveTrace {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Number of linear-system solves performed (the iteration count reported
    /// by the experiments).
    pub fn iterations(&self) -> usize {
        self.solves
    }

    pub fn final_iterate(&self) -> &[f64] {
        self.iterates.last().expect("trace holds at least x0")
    }

    pub fn final_residual_norm(&self) -> f64 {
        *self.residual_norms.last().expect("trace holds at least x0")
    }
}

/// Per-iterate error sequence `e_n = ‖x_n - reference‖`.
pub fn error_sequence(iterates: &[Vec<f64>], reference: &[f64]) -> Vec<f64> {
    iterates
        .iter()
        .map(|x| {
            let d: Vec<f64> = x.iter().zip(reference).map(|(a, b)| a - b).collect();
            numkit::norm2(&d)
        })
        .collect()
}

struct Driver {
    trace: SolveTrace,
    x: Vec<f64>,
    fx: Vec<f64>,
}

enum DriverState {
    Continue,
    Finished,
}

impl Driver {
    fn start<S: VectorSystem + ?Sized>(system: &S, x0: Vec<f64>) -> Driver {
        assert_eq!(x0.len(), system.dim(), "initial guess dimension mismatch");
        let (fx, norm, status) = match system.eval(&x0) {
            Ok(f) if numkit::all_finite(&f) => {
                let n = numkit::norm2(&f);
                (f, n, None)
            }
            Ok(f) => {
                let n = numkit::norm2(&f);
                (f, n, Some(SolveStatus::Diverged(DivergenceCause::Overflow)))
            }
            Err(e) => (
                vec![f64::NAN; x0.len()],
                f64::NAN,
                Some(SolveStatus::Diverged(map_system_error(e))),
            ),
        };
        Driver {
            trace: SolveTrace {
                iterates: vec![x0.clone()],
                steps: Vec::new(),
                residual_norms: vec![norm],
                status: status.unwrap_or(SolveStatus::MaxItersExceeded),
                solves: 0,
            },
            x: x0,
            fx,
        }
    }

    fn failed_at_start(&self) -> bool {
        matches!(self.trace.status, SolveStatus::Diverged(_))
    }

    /// Runs the shared iteration loop. `step_fn` receives the current iterate
    /// and residual vector and returns the proposed update.
    fn run<S, F>(mut self, system: &S, tol: &Tolerances, mut step_fn: F) -> SolveTrace
    where
        S: VectorSystem + ?Sized,
        F: FnMut(&[f64], &[f64]) -> Result<Vec<f64>, DivergenceCause>,
    {
        if self.failed_at_start() {
            return self.trace;
        }
        loop {
            if let DriverState::Finished = self.advance(system, tol, &mut step_fn) {
                return self.trace;
            }
        }
    }

    fn advance<S, F>(&mut self, system: &S, tol: &Tolerances, step_fn: &mut F) -> DriverState
    where
        S: VectorSystem + ?Sized,
        F: FnMut(&[f64], &[f64]) -> Result<Vec<f64>, DivergenceCause>,
    {
        // Residual test first, then the step test; either declares success.
        if self.trace.residual_norms.last().unwrap() <= &tol.abs_residual {
            self.trace.status = SolveStatus::Converged;
            return DriverState::Finished;
        }
        if self.trace.solves >= tol.max_iters {
            self.trace.status = SolveStatus::MaxItersExceeded;
            return DriverState::Finished;
        }
        let step = match step_fn(&self.x, &self.fx) {
            Ok(s) => s,
            Err(cause) => {
                self.trace.status = SolveStatus::Diverged(cause);
                return DriverState::Finished;
            }
        };
        self.trace.solves += 1;
        if !numkit::all_finite(&step) {
            self.trace.status = SolveStatus::Diverged(DivergenceCause::Overflow);
            return DriverState::Finished;
        }
        if numkit::norm2(&step) <= tol.rel_step {
            self.trace.status = SolveStatus::Converged;
            return DriverState::Finished;
        }
        for (xi, si) in self.x.iter_mut().zip(&step) {
            *xi += si;
        }
        if !numkit::all_finite(&self.x) {
            self.trace.status = SolveStatus::Diverged(DivergenceCause::Overflow);
            return DriverState::Finished;
        }
        self.fx = match system.eval(&self.x) {
            Ok(f) => f,
            Err(e) => {
                self.trace.status = SolveStatus::Diverged(map_system_error(e));
                return DriverState::Finished;
            }
        };
        if !numkit::all_finite(&self.fx) {
            self.trace.status = SolveStatus::Diverged(DivergenceCause::Overflow);
            return DriverState::Finished;
        }
        self.trace.steps.push(step);
        self.trace.iterates.push(self.x.clone());
        self.trace.residual_norms.push(numkit::norm2(&self.fx));
        DriverState::Continue
    }
}

fn map_system_error(e: SystemError) -> DivergenceCause {
    match e {
        SystemError::ZeroDivision => DivergenceCause::ZeroDivision,
        // Leaving the admissible domain of a material law ends the run the
        // same way a numerical overflow would.
        SystemError::NonPositiveStretch => DivergenceCause::Overflow,
    }
}

/// Multivariate Newton-Raphson: solve `J(x) Δx = -F(x)`, update `x += Δx`.
pub fn newton_raphson<S: VectorSystem + ?Sized>(
    system: &S,
    x0: &[f64],
    tol: &Tolerances,
) -> SolveTrace {
    Driver::start(system, x0.to_vec()).run(system, tol, |x, fx| {
        let jac = system.jacobian(x).map_err(map_system_error)?;
        if !jac.is_finite() {
            return Err(DivergenceCause::Overflow);
        }
        let rhs: Vec<f64> = fx.iter().map(|f| -f).collect();
        numkit::lu_solve(&jac, &rhs).map_err(|_| DivergenceCause::ZeroDivision)
    })
}

/// Rule producing the modification point `c` from the starting guess.
///
/// The point is built once, when a solve begins, and stays fixed for the
/// whole run; the formulas for the modified system and its derivative are
/// exact under that convention. (Re-deriving `c` from every iterate would
/// plant spurious stationary sets of the modified system, such as the
/// `x_i = 0` planes for the scalar rule, and measurably shrinks the
/// convergence regions.)
#[derive(Debug, Clone, PartialEq)]
pub enum CPolicy {
    /// `c_i = phi * x_i`
    Scalar(f64),
    /// `c_i = phi_i * x_i`
    PerAxis(Vec<f64>),
    /// `c_i = x_i + delta`
    Offset(f64),
    /// Fixed point; every component must differ from the iterate.
    Constant(Vec<f64>),
    /// `c_i = phi * X_i + ζ_i` over a fixed reference configuration, with the
    /// jitter drawn once so all pairwise distances `|c_i - x_i|` stay
    /// distinct.
    AffineOfReference {
        phi: f64,
        reference: Vec<f64>,
        jitter: Vec<f64>,
    },
}

impl CPolicy {
    /// Seeded constructor for the affine-of-reference rule.
    ///
    /// The jitter components are drawn one per stratum of
    /// `[0.5, 1.5) * jitter_scale` (with a dead margin) and permuted across
    /// positions. Components that happen to land too close together collapse
    /// the denominators `F_j(x) - F_j(c)` on near-uniform states, so the
    /// stratification keeps every pairwise jitter distance bounded away from
    /// zero.
    pub fn affine_of_reference(
        phi: f64,
        reference: &[f64],
        jitter_scale: f64,
        seed: RngSeed,
    ) -> CPolicy {
        let n = reference.len();
        let mut rng = SplitMix64::from_seed(seed);
        let mut strata: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            strata.swap(i, j);
        }
        let jitter = (0..n)
            .map(|i| {
                jitter_scale
                    * (0.5 + (strata[i] as f64 + 1.0 / 3.0 + rng.next_f64() / 3.0) / n as f64)
            })
            .collect();
        CPolicy::AffineOfReference {
            phi,
            reference: reference.to_vec(),
            jitter,
        }
    }

    pub fn modification_point(&self, x: &[f64]) -> Vec<f64> {
        match self {
            CPolicy::Scalar(phi) => x.iter().map(|xi| phi * xi).collect(),
            CPolicy::PerAxis(phis) => {
                assert_eq!(phis.len(), x.len(), "per-axis factor length mismatch");
                x.iter().zip(phis).map(|(xi, phi)| phi * xi).collect()
            }
            CPolicy::Offset(delta) => x.iter().map(|xi| xi + delta).collect(),
            CPolicy::Constant(c) => {
                assert_eq!(c.len(), x.len(), "constant point length mismatch");
                c.clone()
            }
            CPolicy::AffineOfReference {
                phi,
                reference,
                jitter,
            } => {
                assert_eq!(reference.len(), x.len(), "reference length mismatch");
                reference
                    .iter()
                    .zip(jitter)
                    .map(|(xi, z)| phi * xi + z)
                    .collect()
            }
        }
    }
}

/// The modification failed at the current pair `(x, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnrError {
    /// Some `|F_j(x) - F_j(c)|` fell below the guard.
    SingularModification,
    /// The system could not be evaluated at `x` or `c`.
    System(SystemError),
}

/// Shared pieces of the modified system at `(x, c)`:
/// `G_j = F_j(x) / (F_j(x) - F_j(c))` and
/// `H_j = -F_j(c) / (F_j(x) - F_j(c))²`.
struct Modification {
    g: Vec<f64>,
    h: Vec<f64>,
}

fn modification_terms(fx: &[f64], fc: &[f64], denom_guard: f64) -> Result<Modification, EnrError> {
    let n = fx.len();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for j in 0..n {
        let d = fx[j] - fc[j];
        if !d.is_finite() || d.abs() < denom_guard * (1.0 + fx[j].abs()) {
            return Err(EnrError::SingularModification);
        }
        g[j] = fx[j] / d;
        h[j] = -fc[j] / (d * d);
    }
    Ok(Modification { g, h })
}

fn build_modification<S: VectorSystem + ?Sized>(
    system: &S,
    x: &[f64],
    c: &[f64],
    denom_guard: f64,
) -> Result<Modification, EnrError> {
    let fx = system.eval(x).map_err(EnrError::System)?;
    let fc = system.eval(c).map_err(|_| EnrError::SingularModification)?;
    modification_terms(&fx, &fc, denom_guard)
}

/// The modified function matrix `q_ij = (x_i - c_i) G_j`.
pub fn enr_build_q<S: VectorSystem + ?Sized>(
    system: &S,
    x: &[f64],
    c: &[f64],
    denom_guard: f64,
) -> Result<Matrix, EnrError> {
    let m = build_modification(system, x, c, denom_guard)?;
    let n = x.len();
    Ok(Matrix::from_fn(n, n, |i, j| (x[i] - c[i]) * m.g[j]))
}

/// The flattened derivative `w_Lk = δ_ik G_j + (x_i - c_i) F_j,k H_j` with
/// rows ordered by `L = N(i-1) + j` (stored zero-based).
pub fn enr_build_w<S: VectorSystem + ?Sized>(
    system: &S,
    x: &[f64],
    c: &[f64],
    denom_guard: f64,
) -> Result<Matrix, EnrError> {
    let m = build_modification(system, x, c, denom_guard)?;
    let jac = system.jacobian(x).map_err(EnrError::System)?;
    let n = x.len();
    let mut w = Matrix::zeros(n * n, n);
    for i in 0..n {
        for j in 0..n {
            let row = n * i + j;
            for k in 0..n {
                let kronecker = if i == k { m.g[j] } else { 0.0 };
                w[(row, k)] = kronecker + (x[i] - c[i]) * jac[(j, k)] * m.h[j];
            }
        }
    }
    Ok(w)
}

/// Extended Newton-Raphson: the modification point is fixed from the
/// starting guess, then each iteration flattens `q` with the same `L` map,
/// solves `Δx = pinv(w) (-q_flat)` and updates. Convergence is still tested
/// on the original residual `F`, never on `q`.
pub fn enr_solve<S: VectorSystem + ?Sized>(
    system: &S,
    x0: &[f64],
    policy: &CPolicy,
    tol: &Tolerances,
) -> SolveTrace {
    let n = system.dim();
    let c = policy.modification_point(x0);
    Driver::start(system, x0.to_vec()).run(system, tol, |x, fx| {
        if c.iter().zip(x).any(|(ci, xi)| ci == xi) {
            return Err(DivergenceCause::SingularModification);
        }
        let fc = system
            .eval(&c)
            .map_err(|_| DivergenceCause::SingularModification)?;
        let modif = modification_terms(fx, &fc, tol.denom_guard)
            .map_err(|_| DivergenceCause::SingularModification)?;
        let jac = system.jacobian(x).map_err(map_system_error)?;
        if !jac.is_finite() {
            return Err(DivergenceCause::Overflow);
        }
        let mut w = Matrix::zeros(n * n, n);
        let mut rhs = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let row = n * i + j;
                rhs[row] = -(x[i] - c[i]) * modif.g[j];
                for k in 0..n {
                    let kronecker = if i == k { modif.g[j] } else { 0.0 };
                    w[(row, k)] = kronecker + (x[i] - c[i]) * jac[(j, k)] * modif.h[j];
                }
            }
        }
        if !w.is_finite() || !numkit::all_finite(&rhs) {
            return Err(DivergenceCause::Overflow);
        }
        Ok(numkit::moore_penrose_pinv(&w).mul_vec(&rhs))
    })
}

/// Both starting guesses of the diagonal secant share a component, which
/// leaves that component's secant slope undefined from the outset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImmediateFailure {
    pub component: usize,
}

impl std::fmt::Display for ImmediateFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "diagonal secant guesses coincide in component {}",
            self.component
        )
    }
}

impl std::error::Error for ImmediateFailure {}

/// Componentwise diagonal secant with rolling guesses:
/// `Δs_i = -F_i(x⁽ⁿ⁺¹⁾) ΔX_i / ΔH_i` where `ΔX_i` and `ΔH_i` are the latest
/// differences of iterates and residuals. The trace starts at `x1`; `x0` only
/// feeds the first slope.
pub fn diagonal_secant<S: VectorSystem + ?Sized>(
    system: &S,
    x0: &[f64],
    x1: &[f64],
    tol: &Tolerances,
) -> Result<SolveTrace, ImmediateFailure> {
    diagonal_secant_impl(system, x0, x1, tol, -1.0)
}

/// Variant applying the step with the opposite sign, kept for comparing the
/// two readings of the update rule. The default solver uses the sign that
/// reproduces the exact secant on affine systems.
pub fn diagonal_secant_with_flipped_step<S: VectorSystem + ?Sized>(
    system: &S,
    x0: &[f64],
    x1: &[f64],
    tol: &Tolerances,
) -> Result<SolveTrace, ImmediateFailure> {
    diagonal_secant_impl(system, x0, x1, tol, 1.0)
}

fn diagonal_secant_impl<S: VectorSystem + ?Sized>(
    system: &S,
    x0: &[f64],
    x1: &[f64],
    tol: &Tolerances,
    sign: f64,
) -> Result<SolveTrace, ImmediateFailure> {
    assert_eq!(x0.len(), system.dim());
    assert_eq!(x1.len(), system.dim());
    if let Some(component) = x0.iter().zip(x1).position(|(a, b)| a == b) {
        return Err(ImmediateFailure { component });
    }
    let mut prev_x = x0.to_vec();
    let mut prev_f = match system.eval(x0) {
        Ok(f) => f,
        Err(_) => vec![f64::NAN; x0.len()],
    };
    Ok(
        Driver::start(system, x1.to_vec()).run(system, tol, |x, fx| {
            if !numkit::all_finite(&prev_f) {
                return Err(DivergenceCause::Overflow);
            }
            let mut step = vec![0.0; x.len()];
            for i in 0..x.len() {
                let dh = fx[i] - prev_f[i];
                if dh == 0.0 {
                    return Err(DivergenceCause::ZeroDivision);
                }
                let dx = x[i] - prev_x[i];
                step[i] = sign * fx[i] * dx / dh;
            }
            prev_x = x.to_vec();
            prev_f = fx.to_vec();
            Ok(step)
        }),
    )
}

/// Convergence order and rate estimated from an error sequence.
///
/// For each admissible `n`:
/// `q_n = log(e_{n+1}/e_n) / log(e_n/e_{n-1})` and `μ_n = e_{n+1} / e_n^q`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateOrderEstimate {
    pub order_q: Vec<f64>,
    pub rate_mu: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateOrderError {
    /// Fewer than four error terms: three iterations (four iterates) are the
    /// minimum for one estimate.
    InsufficientData,
    /// Error terms must be strictly positive for the logarithms to exist.
    NonPositiveError,
}

pub fn estimate_rate_order(errors: &[f64]) -> Result<RateOrderEstimate, RateOrderError> {
    if errors.len() < 4 {
        return Err(RateOrderError::InsufficientData);
    }
    if errors.iter().any(|&e| e <= 0.0) {
        return Err(RateOrderError::NonPositiveError);
    }
    let mut order_q = Vec::with_capacity(errors.len() - 2);
    let mut rate_mu = Vec::with_capacity(errors.len() - 2);
    for n in 1..errors.len() - 1 {
        let q = (errors[n + 1] / errors[n]).ln() / (errors[n] / errors[n - 1]).ln();
        order_q.push(q);
        rate_mu.push(errors[n + 1].abs() / errors[n].abs().powf(q));
    }
    Ok(RateOrderEstimate { order_q, rate_mu })
}
