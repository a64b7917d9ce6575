//! Nonlinear least squares by Gauss-Newton and its second-order corrected
//! variant.
//!
//! Gauss-Newton solves the normal system `(JᵀJ) Δθ = -Jᵀr` built from the
//! residual Jacobian alone. The corrected step first computes the plain
//! Gauss-Newton update `Δθ̂`, folds the residual curvature into
//! `s_ij = r_i,j + ½ r_i,jk Δθ̂_k`, and re-solves `(sᵀs) Δθ̄ = -sᵀr`. Both
//! solvers share the trace layout and termination rules of the root finders.

use crate::numkit::{self, lu_solve, Matrix, RngSeed, SplitMix64};
use crate::rootfind::{DivergenceCause, SolveStatus, Tolerances};

/// A parameterised scalar model `f(x, θ)`.
///
/// Models may register analytic parameter derivatives; anything left
/// unregistered is differentiated by central finite differences.
pub trait FitModel {
    fn input_dims(&self) -> usize;
    fn param_count(&self) -> usize;
    fn eval(&self, x: &[f64], theta: &[f64]) -> f64;

    /// Generating parameters, when the model knows them.
    fn true_params(&self) -> Option<Vec<f64>> {
        None
    }

    /// Analytic `∂f/∂θ_j`, if available.
    fn param_gradient(&self, _x: &[f64], _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Analytic `∂²f/∂θ_j∂θ_k`, if available.
    fn param_hessian(&self, _x: &[f64], _theta: &[f64]) -> Option<Matrix> {
        None
    }
}

/// Observed input/output pairs driving a fit.
#[derive(Debug, Clone)]
pub struct Observations {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
    /// Signal-to-noise ratio of the generating process, `None` for noiseless
    /// data.
    pub snr_db: Option<f64>,
}

impl Observations {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

/// The model produced a non-finite value where a residual or derivative was
/// needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonFiniteModel;

impl std::fmt::Display for NonFiniteModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "model evaluated to a non-finite value")
    }
}

impl std::error::Error for NonFiniteModel {}

/// Residual vector `r_i = y_i - f(x_i, θ)`.
pub fn residuals<M: FitModel + ?Sized>(
    model: &M,
    obs: &Observations,
    theta: &[f64],
) -> Result<Vec<f64>, NonFiniteModel> {
    assert_eq!(theta.len(), model.param_count());
    let mut r = Vec::with_capacity(obs.len());
    for (x, y) in obs.inputs.iter().zip(&obs.outputs) {
        let f = model.eval(x, theta);
        if !f.is_finite() {
            return Err(NonFiniteModel);
        }
        r.push(y - f);
    }
    Ok(r)
}

/// Residual Jacobian `r_i,j = -∂f(x_i, θ)/∂θ_j` as an m×p matrix.
///
/// Finite-difference columns use the step `1e-6 * (1 + |θ_j|)`.
pub fn jacobian<M: FitModel + ?Sized>(
    model: &M,
    obs: &Observations,
    theta: &[f64],
) -> Result<Matrix, NonFiniteModel> {
    let m = obs.len();
    let p = model.param_count();
    let mut jac = Matrix::zeros(m, p);
    let mut probe = theta.to_vec();
    for (i, x) in obs.inputs.iter().enumerate() {
        if let Some(grad) = model.param_gradient(x, theta) {
            for j in 0..p {
                if !grad[j].is_finite() {
                    return Err(NonFiniteModel);
                }
                jac[(i, j)] = -grad[j];
            }
        } else {
            for j in 0..p {
                let h = 1e-6 * (1.0 + theta[j].abs());
                probe[j] = theta[j] + h;
                let fp = model.eval(x, &probe);
                probe[j] = theta[j] - h;
                let fm = model.eval(x, &probe);
                probe[j] = theta[j];
                let d = (fp - fm) / (2.0 * h);
                if !d.is_finite() {
                    return Err(NonFiniteModel);
                }
                jac[(i, j)] = -d;
            }
        }
    }
    Ok(jac)
}

/// Residual curvature `r_i,jk = -∂²f(x_i, θ)/∂θ_j∂θ_k`, one symmetric p×p
/// block per observation.
///
/// The finite-difference route uses the four-point cross stencil with step
/// `eps^(1/4) * (1 + |θ_j|)`, which is symmetric in `(j, k)` by construction.
pub fn residual_second_derivative<M: FitModel + ?Sized>(
    model: &M,
    obs: &Observations,
    theta: &[f64],
) -> Result<Vec<Matrix>, NonFiniteModel> {
    let p = model.param_count();
    let mut blocks = Vec::with_capacity(obs.len());
    let step = |j: usize| f64::EPSILON.powf(0.25) * (1.0 + theta[j].abs());
    for x in &obs.inputs {
        if let Some(hess) = model.param_hessian(x, theta) {
            if !hess.is_finite() {
                return Err(NonFiniteModel);
            }
            blocks.push(Matrix::from_fn(p, p, |j, k| -hess[(j, k)]));
            continue;
        }
        let f0 = model.eval(x, theta);
        let mut block = Matrix::zeros(p, p);
        let mut probe = theta.to_vec();
        for j in 0..p {
            let hj = step(j);
            for k in j..p {
                let d2 = if j == k {
                    probe[j] = theta[j] + hj;
                    let fp = model.eval(x, &probe);
                    probe[j] = theta[j] - hj;
                    let fm = model.eval(x, &probe);
                    probe[j] = theta[j];
                    (fp - 2.0 * f0 + fm) / (hj * hj)
                } else {
                    let hk = step(k);
                    let mut corner = |sj: f64, sk: f64| {
                        probe[j] = theta[j] + sj * hj;
                        probe[k] = theta[k] + sk * hk;
                        let f = model.eval(x, &probe);
                        probe[j] = theta[j];
                        probe[k] = theta[k];
                        f
                    };
                    (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0)
                        + corner(-1.0, -1.0))
                        / (4.0 * hj * hk)
                };
                if !d2.is_finite() {
                    return Err(NonFiniteModel);
                }
                block[(j, k)] = -d2;
                block[(k, j)] = -d2;
            }
        }
        blocks.push(block);
    }
    Ok(blocks)
}

/// Parameter-space analogue of [`crate::rootfind::SolveTrace`].
#[derive(Debug, Clone)]
pub struct FitTrace {
    pub iterates: Vec<Vec<f64>>,
    pub steps: Vec<Vec<f64>>,
    pub sse: Vec<f64>,
    pub status: SolveStatus,
    solves: usize,
}

impl FitTrace {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Number of normal-equation solves performed (a corrected iteration
    /// counts once).
    pub fn iterations(&self) -> usize {
        self.solves
    }

    pub fn final_params(&self) -> &[f64] {
        self.iterates.last().expect("trace holds at least θ0")
    }
}

fn sse_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn run_fit<M: FitModel + ?Sized>(
    model: &M,
    obs: &Observations,
    theta0: &[f64],
    tol: &Tolerances,
    corrected: bool,
) -> FitTrace {
    assert!(
        obs.len() >= model.param_count(),
        "need at least as many observations as parameters"
    );
    let mut theta = theta0.to_vec();
    let mut trace = FitTrace {
        iterates: vec![theta.clone()],
        steps: Vec::new(),
        sse: Vec::new(),
        status: SolveStatus::MaxItersExceeded,
        solves: 0,
    };
    let mut r = match residuals(model, obs, &theta) {
        Ok(r) => r,
        Err(NonFiniteModel) => {
            trace.sse.push(f64::NAN);
            trace.status = SolveStatus::Diverged(DivergenceCause::Overflow);
            return trace;
        }
    };
    trace.sse.push(sse_of(&r));

    loop {
        if numkit::norm2(&r) <= tol.abs_residual {
            trace.status = SolveStatus::Converged;
            return trace;
        }
        if trace.solves >= tol.max_iters {
            trace.status = SolveStatus::MaxItersExceeded;
            return trace;
        }
        let jac = match jacobian(model, obs, &theta) {
            Ok(j) => j,
            Err(NonFiniteModel) => {
                trace.status = SolveStatus::Diverged(DivergenceCause::Overflow);
                return trace;
            }
        };
        let gn_step = match normal_solve(&jac, &r) {
            Ok(s) => s,
            Err(cause) => {
                trace.status = SolveStatus::Diverged(cause);
                return trace;
            }
        };
        let step = if corrected {
            let curvature = match residual_second_derivative(model, obs, &theta) {
                Ok(c) => c,
                Err(NonFiniteModel) => {
                    trace.status = SolveStatus::Diverged(DivergenceCause::Overflow);
                    return trace;
                }
            };
            let s = corrected_design(&jac, &curvature, &gn_step);
            match normal_solve(&s, &r) {
                Ok(s) => s,
                Err(cause) => {
                    trace.status = SolveStatus::Diverged(cause);
                    return trace;
                }
            }
        } else {
            gn_step
        };
        trace.solves += 1;
        if !numkit::all_finite(&step) {
            trace.status = SolveStatus::Diverged(DivergenceCause::Overflow);
            return trace;
        }
        if numkit::norm2(&step) <= tol.rel_step {
            trace.status = SolveStatus::Converged;
            return trace;
        }
        for (t, s) in theta.iter_mut().zip(&step) {
            *t += s;
        }
        r = match residuals(model, obs, &theta) {
            Ok(r) => r,
            Err(NonFiniteModel) => {
                trace.status = SolveStatus::Diverged(DivergenceCause::Overflow);
                return trace;
            }
        };
        trace.steps.push(step);
        trace.iterates.push(theta.clone());
        trace.sse.push(sse_of(&r));
    }
}

/// Solve `(dᵀd) Δ = -dᵀr` by LU.
fn normal_solve(design: &Matrix, r: &[f64]) -> Result<Vec<f64>, DivergenceCause> {
    let dt = design.transpose();
    let normal = dt.mul_mat(design);
    let rhs: Vec<f64> = dt.mul_vec(r).iter().map(|v| -v).collect();
    if !normal.is_finite() || !numkit::all_finite(&rhs) {
        return Err(DivergenceCause::Overflow);
    }
    lu_solve(&normal, &rhs).map_err(|_| DivergenceCause::ZeroDivision)
}

/// `s_ij = r_i,j + ½ r_i,jk Δθ̂_k`.
fn corrected_design(jac: &Matrix, curvature: &[Matrix], gn_step: &[f64]) -> Matrix {
    Matrix::from_fn(jac.rows(), jac.cols(), |i, j| {
        let correction: f64 = (0..jac.cols())
            .map(|k| curvature[i][(j, k)] * gn_step[k])
            .sum();
        jac[(i, j)] + 0.5 * correction
    })
}

/// Plain Gauss-Newton iteration.
pub fn gauss_newton<M: FitModel + ?Sized>(
    model: &M,
    obs: &Observations,
    theta0: &[f64],
    tol: &Tolerances,
) -> FitTrace {
    run_fit(model, obs, theta0, tol, false)
}

/// Two-stage corrected Gauss-Newton iteration.
pub fn corrected_gauss_newton<M: FitModel + ?Sized>(
    model: &M,
    obs: &Observations,
    theta0: &[f64],
    tol: &Tolerances,
) -> FitTrace {
    run_fit(model, obs, theta0, tol, true)
}

/// Draws `n` inputs by Latin hypercube sampling over `ranges` (one interval
/// per input dimension) and evaluates the model at its generating parameters,
/// optionally adding Gaussian noise.
///
/// The noise level follows the amplitude convention
/// `σ = RMS(signal) * 10^(-snr_db / 20)`.
pub fn generate_observations<M: FitModel + ?Sized>(
    model: &M,
    ranges: &[(f64, f64)],
    n: usize,
    snr_db: Option<f64>,
    seed: RngSeed,
) -> Observations {
    assert_eq!(ranges.len(), model.input_dims(), "one range per input dim");
    let theta_star = model
        .true_params()
        .expect("generating observations requires true parameters");
    let unit = numkit::lhs_sample(ranges.len(), n, seed);
    let inputs: Vec<Vec<f64>> = unit
        .into_iter()
        .map(|u| {
            u.iter()
                .zip(ranges)
                .map(|(v, (lo, hi))| lo + (hi - lo) * v)
                .collect()
        })
        .collect();
    let mut outputs: Vec<f64> = inputs
        .iter()
        .map(|x| model.eval(x, &theta_star))
        .collect();
    if let Some(db) = snr_db {
        let rms = (outputs.iter().map(|y| y * y).sum::<f64>() / n as f64).sqrt();
        let sigma = rms * 10f64.powf(-db / 20.0);
        let mut rng = SplitMix64::from_seed(seed.derive(0x4E01_5E00));
        for y in outputs.iter_mut() {
            *y += sigma * rng.next_gaussian();
        }
    }
    Observations {
        inputs,
        outputs,
        snr_db,
    }
}

/// `count` starting guesses at exactly `‖θ0 - θ*‖ = distance`, with the
/// directions taken from one Latin hypercube draw mapped to `[-1, 1]^p` and
/// normalised.
pub fn initial_guesses_at_distance(
    theta_star: &[f64],
    distance: f64,
    count: usize,
    seed: RngSeed,
) -> Vec<Vec<f64>> {
    assert!(distance >= 0.0);
    let p = theta_star.len();
    let mut guesses = Vec::with_capacity(count);
    let mut draw_seed = seed;
    'outer: while guesses.len() < count {
        let sample = numkit::lhs_sample(p, count, draw_seed);
        for u in sample {
            let dir: Vec<f64> = u.iter().map(|v| 2.0 * v - 1.0).collect();
            let norm = numkit::norm2(&dir);
            if norm < 1e-12 {
                // Degenerate direction; redraw the batch from a derived seed.
                draw_seed = draw_seed.derive(0xD1CE);
                continue 'outer;
            }
            guesses.push(
                theta_star
                    .iter()
                    .zip(&dir)
                    .map(|(t, d)| t + distance * d / norm)
                    .collect(),
            );
            if guesses.len() == count {
                break;
            }
        }
    }
    guesses
}

/// Single starting guess at the given distance from `θ*`.
pub fn initial_guess_at_distance(theta_star: &[f64], distance: f64, seed: RngSeed) -> Vec<f64> {
    if distance == 0.0 {
        return theta_star.to_vec();
    }
    initial_guesses_at_distance(theta_star, distance, 1, seed)
        .pop()
        .expect("one guess requested")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::norm2;

    /// `f(x, θ) = θ²` against a single observation; small enough to check the
    /// corrected step by hand.
    struct SquareParam;

    impl FitModel for SquareParam {
        fn input_dims(&self) -> usize {
            1
        }
        fn param_count(&self) -> usize {
            1
        }
        fn eval(&self, _x: &[f64], theta: &[f64]) -> f64 {
            theta[0] * theta[0]
        }
    }

    struct LinearModel;

    impl FitModel for LinearModel {
        fn input_dims(&self) -> usize {
            1
        }
        fn param_count(&self) -> usize {
            1
        }
        fn eval(&self, x: &[f64], theta: &[f64]) -> f64 {
            theta[0] * x[0]
        }
        fn true_params(&self) -> Option<Vec<f64>> {
            Some(vec![3.0])
        }
        fn param_gradient(&self, x: &[f64], _theta: &[f64]) -> Option<Vec<f64>> {
            Some(vec![x[0]])
        }
        fn param_hessian(&self, _x: &[f64], _theta: &[f64]) -> Option<Matrix> {
            Some(Matrix::zeros(1, 1))
        }
    }

    #[test]
    fn residuals_constant_model() {
        struct Constant;
        impl FitModel for Constant {
            fn input_dims(&self) -> usize {
                1
            }
            fn param_count(&self) -> usize {
                1
            }
            fn eval(&self, _x: &[f64], theta: &[f64]) -> f64 {
                theta[0]
            }
        }
        let obs = Observations {
            inputs: vec![vec![0.0]],
            outputs: vec![2.5],
            snr_db: None,
        };
        let r = residuals(&Constant, &obs, &[1.0]).unwrap();
        assert_eq!(r, vec![1.5]);
    }

    #[test]
    fn residuals_zero_at_true_params() {
        let model = LinearModel;
        let obs = generate_observations(&model, &[(1.0, 10.0)], 8, None, RngSeed(5));
        let r = residuals(&model, &obs, &[3.0]).unwrap();
        assert!(norm2(&r) < 1e-12);
    }

    #[test]
    fn jacobian_of_linear_model_is_minus_x() {
        let model = LinearModel;
        let obs = Observations {
            inputs: vec![vec![2.0], vec![-4.0]],
            outputs: vec![6.0, -12.0],
            snr_db: None,
        };
        let j = jacobian(&model, &obs, &[3.0]).unwrap();
        assert!((j[(0, 0)] + 2.0).abs() < 1e-8);
        assert!((j[(1, 0)] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn second_derivative_of_linear_model_vanishes() {
        let model = LinearModel;
        let obs = Observations {
            inputs: vec![vec![2.0], vec![5.0]],
            outputs: vec![6.0, 15.0],
            snr_db: None,
        };
        let blocks = residual_second_derivative(&model, &obs, &[3.0]).unwrap();
        for b in blocks {
            assert!(b.max_abs() < 1e-6);
        }
    }

    #[test]
    fn second_derivative_of_square_param() {
        let obs = Observations {
            inputs: vec![vec![0.0]],
            outputs: vec![0.0],
            snr_db: None,
        };
        let blocks = residual_second_derivative(&SquareParam, &obs, &[1.0]).unwrap();
        // r = y - θ², so r_,θθ = -2.
        assert!((blocks[0][(0, 0)] + 2.0).abs() < 1e-5);
    }

    #[test]
    fn corrected_step_matches_hand_algebra() {
        // r(θ) = -θ² with y = 0, θ0 = 1: Δθ̂ = -1/2,
        // s = r_,θ + ½ r_,θθ Δθ̂ = -2 + ½(-2)(-½) = -1.5,
        // Δθ̄ = -(r s)/(s s) = -(1)(-1.5)/2.25 = -2/3.
        let obs = Observations {
            inputs: vec![vec![0.0]],
            outputs: vec![0.0],
            snr_db: None,
        };
        let tol = Tolerances::new(1e-12, 1e-12, 1);
        let gn = gauss_newton(&SquareParam, &obs, &[1.0], &tol);
        assert!((gn.steps[0][0] + 0.5).abs() < 1e-6, "{}", gn.steps[0][0]);
        let cgn = corrected_gauss_newton(&SquareParam, &obs, &[1.0], &tol);
        assert!(
            (cgn.steps[0][0] + 2.0 / 3.0).abs() < 1e-5,
            "{}",
            cgn.steps[0][0]
        );
    }

    #[test]
    fn linear_fit_converges_in_one_iteration() {
        let model = LinearModel;
        let obs = generate_observations(&model, &[(1.0, 10.0)], 12, None, RngSeed(11));
        let tol = Tolerances::new(1e-6, 1e-6, 100);
        let trace = gauss_newton(&model, &obs, &[40.0], &tol);
        assert!(trace.converged());
        assert_eq!(trace.iterations(), 1);
        assert!((trace.final_params()[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn cgn_equals_gn_on_linear_model() {
        let model = LinearModel;
        let obs = generate_observations(&model, &[(1.0, 10.0)], 12, Some(20.0), RngSeed(17));
        let tol = Tolerances::new(1e-9, 1e-12, 100);
        let gn = gauss_newton(&model, &obs, &[40.0], &tol);
        let cgn = corrected_gauss_newton(&model, &obs, &[40.0], &tol);
        assert_eq!(gn.iterates.len(), cgn.iterates.len());
        for (a, b) in gn.iterates.iter().zip(&cgn.iterates) {
            assert!((a[0] - b[0]).abs() <= 1e-10);
        }
    }

    #[test]
    fn power_law_fit_recovers_generating_parameters() {
        let entry = crate::problems::model_by_name("gn3").unwrap();
        let model = entry.model.as_ref();
        let star = model.true_params().unwrap();
        let obs = generate_observations(model, &entry.sampling_range, 20, None, RngSeed(2));
        let theta0: Vec<f64> = star.iter().map(|t| t * 1.01).collect();
        let tol = Tolerances::new(1e-9, 1e-9, 100);
        for trace in [
            gauss_newton(model, &obs, &theta0, &tol),
            corrected_gauss_newton(model, &obs, &theta0, &tol),
        ] {
            assert!(trace.converged(), "{:?}", trace.status);
            for (got, want) in trace.final_params().iter().zip(&star) {
                assert!((got - want).abs() <= 1e-6, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn noise_level_follows_snr_convention() {
        let model = LinearModel;
        let clean = generate_observations(&model, &[(1.0, 10.0)], 10_000, None, RngSeed(23));
        let noisy = generate_observations(&model, &[(1.0, 10.0)], 10_000, Some(20.0), RngSeed(23));
        let signal_rms =
            (clean.outputs.iter().map(|y| y * y).sum::<f64>() / clean.outputs.len() as f64).sqrt();
        let noise_rms = (clean
            .outputs
            .iter()
            .zip(&noisy.outputs)
            .map(|(c, n)| (n - c) * (n - c))
            .sum::<f64>()
            / clean.outputs.len() as f64)
            .sqrt();
        let ratio = noise_rms / signal_rms;
        // 20 dB means a 10:1 amplitude ratio; allow 30% statistical slack.
        assert!((ratio - 0.1).abs() < 0.03, "ratio {ratio}");
    }

    #[test]
    fn guess_distance_is_exact() {
        let theta_star = [1.0, -2.0, 3.0];
        assert_eq!(
            initial_guess_at_distance(&theta_star, 0.0, RngSeed(1)),
            theta_star.to_vec()
        );
        for seed in 0..10u64 {
            let g = initial_guess_at_distance(&theta_star, 5.0, RngSeed(seed));
            let d: Vec<f64> = g.iter().zip(&theta_star).map(|(a, b)| a - b).collect();
            assert!((norm2(&d) - 5.0).abs() < 1e-12);
        }
        // Distinct seeds give distinct directions.
        let a = initial_guess_at_distance(&theta_star, 5.0, RngSeed(100));
        let b = initial_guess_at_distance(&theta_star, 5.0, RngSeed(101));
        assert_ne!(a, b);
    }

    #[test]
    fn descent_direction_for_gn_steps() {
        let model = LinearModel;
        let obs = generate_observations(&model, &[(1.0, 10.0)], 15, Some(10.0), RngSeed(31));
        let theta = [25.0];
        let r = residuals(&model, &obs, &theta).unwrap();
        let j = jacobian(&model, &obs, &theta).unwrap();
        let grad = j.transpose().mul_vec(&r);
        let step = super::normal_solve(&j, &r).unwrap();
        let slope: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();
        assert!(slope < 0.0, "step is not a descent direction");
    }
}
