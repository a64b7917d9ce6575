//! Total-Lagrangian finite elements for a one-dimensional bar.
//!
//! The bar is discretised with linear two-node elements over the reference
//! coordinates `X_I`. Node 0 carries the displacement boundary (`u = 0`);
//! the last node carries the traction. With linear shape functions the first
//! Piola-Kirchhoff stress is constant per element, so the internal force of
//! an element is `P · (-1, +1)` and equilibrium reads
//! `f_ext - f_int = 0` over the free nodes. Stresses come from one of three
//! uniaxial constitutive laws: linear elastic, Mooney-Rivlin or
//! Veronda-Westmann, all written in terms of the element stretch
//! `λ = (x_2 - x_1) / (X_2 - X_1)`.

use crate::minimize::{FitModel, Observations};
use crate::numkit::{Matrix, RngSeed};
use crate::rootfind::{
    enr_solve, newton_raphson, CPolicy, SolveTrace, SystemError, Tolerances, VectorSystem,
};

/// A stretch left the open half-line `λ > 0` where the material laws are
/// defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonPositiveStretch;

impl std::fmt::Display for NonPositiveStretch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "element stretch is not positive")
    }
}

impl std::error::Error for NonPositiveStretch {}

/// A material parameter violated its admissible range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvalidMaterial(pub &'static str);

impl std::fmt::Display for InvalidMaterial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid material: {}", self.0)
    }
}

impl std::error::Error for InvalidMaterial {}

/// Uniaxial constitutive law mapping stretch to first Piola-Kirchhoff stress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaterialModel {
    /// `P = E (λ - 1)`
    LinearElastic { modulus: f64 },
    /// `P = μν (λ - 1/λ²) + μ(1-ν)(1 - 1/λ³)`
    MooneyRivlin { mu: f64, nu: f64 },
    /// `P = 2A (λ - 1/λ²) exp(B (λ² + 2/λ - 3)) - A (1 - 1/λ³)`
    VerondaWestmann { a: f64, b: f64 },
}

impl MaterialModel {
    pub fn linear_elastic(modulus: f64) -> Result<MaterialModel, InvalidMaterial> {
        if modulus > 0.0 && modulus.is_finite() {
            Ok(MaterialModel::LinearElastic { modulus })
        } else {
            Err(InvalidMaterial("modulus must be positive"))
        }
    }

    pub fn mooney_rivlin(mu: f64, nu: f64) -> Result<MaterialModel, InvalidMaterial> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(InvalidMaterial("shear modulus must be positive"));
        }
        if !(0.0..=1.0).contains(&nu) {
            return Err(InvalidMaterial("nu must lie in [0, 1]"));
        }
        Ok(MaterialModel::MooneyRivlin { mu, nu })
    }

    pub fn veronda_westmann(a: f64, b: f64) -> Result<MaterialModel, InvalidMaterial> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(InvalidMaterial("stiffness A must be positive"));
        }
        if !b.is_finite() {
            return Err(InvalidMaterial("stiffness B must be finite"));
        }
        Ok(MaterialModel::VerondaWestmann { a, b })
    }

    pub fn family(&self) -> MaterialFamily {
        match self {
            MaterialModel::LinearElastic { .. } => MaterialFamily::LinearElastic,
            MaterialModel::MooneyRivlin { .. } => MaterialFamily::MooneyRivlin,
            MaterialModel::VerondaWestmann { .. } => MaterialFamily::VerondaWestmann,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            MaterialModel::LinearElastic { modulus } => vec![modulus],
            MaterialModel::MooneyRivlin { mu, nu } => vec![mu, nu],
            MaterialModel::VerondaWestmann { a, b } => vec![a, b],
        }
    }

    /// Stress and tangent `(P, dP/dλ)` at a stretch.
    pub fn stress(&self, lambda: f64) -> Result<(f64, f64), NonPositiveStretch> {
        if !(lambda > 0.0) {
            return Err(NonPositiveStretch);
        }
        Ok(match *self {
            MaterialModel::LinearElastic { modulus } => (modulus * (lambda - 1.0), modulus),
            MaterialModel::MooneyRivlin { mu, nu } => {
                let inv2 = 1.0 / (lambda * lambda);
                let inv3 = inv2 / lambda;
                let inv4 = inv3 / lambda;
                let p = mu * nu * (lambda - inv2) + mu * (1.0 - nu) * (1.0 - inv3);
                let dp = mu * nu * (1.0 + 2.0 * inv3) + 3.0 * mu * (1.0 - nu) * inv4;
                (p, dp)
            }
            MaterialModel::VerondaWestmann { a, b } => {
                let inv2 = 1.0 / (lambda * lambda);
                let inv3 = inv2 / lambda;
                let inv4 = inv3 / lambda;
                let u = lambda - inv2;
                let g = lambda * lambda + 2.0 / lambda - 3.0;
                let eg = (b * g).exp();
                let p = 2.0 * a * u * eg - a * (1.0 - inv3);
                let dg = 2.0 * lambda - 2.0 * inv2;
                let dp = 2.0 * a * eg * (1.0 + 2.0 * inv3 + u * b * dg) - 3.0 * a * inv4;
                (p, dp)
            }
        })
    }
}

/// Constitutive family, used by the inverse models where the parameters are
/// the unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaterialFamily {
    LinearElastic,
    MooneyRivlin,
    VerondaWestmann,
}

impl MaterialFamily {
    pub fn param_count(&self) -> usize {
        match self {
            MaterialFamily::LinearElastic => 1,
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MaterialFamily::LinearElastic => "linear-elastic",
            MaterialFamily::MooneyRivlin => "mooney-rivlin",
            MaterialFamily::VerondaWestmann => "veronda-westmann",
        }
    }

    /// Validated material from a parameter vector.
    pub fn material(&self, params: &[f64]) -> Result<MaterialModel, InvalidMaterial> {
        match self {
            MaterialFamily::LinearElastic => MaterialModel::linear_elastic(params[0]),
            MaterialFamily::MooneyRivlin => MaterialModel::mooney_rivlin(params[0], params[1]),
            MaterialFamily::VerondaWestmann => {
                MaterialModel::veronda_westmann(params[0], params[1])
            }
        }
    }

    /// Unvalidated stress evaluation used while fitting, where intermediate
    /// parameter iterates may wander outside the admissible set. Non-positive
    /// stretches evaluate to NaN.
    pub fn stress_raw(&self, params: &[f64], lambda: f64) -> f64 {
        if !(lambda > 0.0) {
            return f64::NAN;
        }
        let inv2 = 1.0 / (lambda * lambda);
        let inv3 = inv2 / lambda;
        match self {
            MaterialFamily::LinearElastic => params[0] * (lambda - 1.0),
            MaterialFamily::MooneyRivlin => {
                let (mu, nu) = (params[0], params[1]);
                mu * nu * (lambda - inv2) + mu * (1.0 - nu) * (1.0 - inv3)
            }
            MaterialFamily::VerondaWestmann => {
                let (a, b) = (params[0], params[1]);
                let g = lambda * lambda + 2.0 / lambda - 3.0;
                2.0 * a * (lambda - inv2) * (b * g).exp() - a * (1.0 - inv3)
            }
        }
    }
}

/// Reference discretisation: strictly increasing nodal coordinates and the
/// per-element connectivity pairs.
#[derive(Debug, Clone)]
pub struct Mesh1D {
    pub ref_nodes: Vec<f64>,
    pub connectivity: Vec<[usize; 2]>,
}

impl Mesh1D {
    pub fn new(ref_nodes: Vec<f64>) -> Mesh1D {
        assert!(ref_nodes.len() >= 2, "a mesh needs at least one element");
        assert!(
            ref_nodes.windows(2).all(|w| w[1] > w[0]),
            "reference nodes must be strictly increasing"
        );
        let connectivity = (0..ref_nodes.len() - 1).map(|e| [e, e + 1]).collect();
        Mesh1D {
            ref_nodes,
            connectivity,
        }
    }

    /// `n_elems` equal elements spanning `[0, length]`.
    pub fn uniform(n_elems: usize, length: f64) -> Mesh1D {
        assert!(n_elems >= 1 && length > 0.0);
        let nodes = (0..=n_elems)
            .map(|i| length * i as f64 / n_elems as f64)
            .collect();
        Mesh1D::new(nodes)
    }

    pub fn n_nodes(&self) -> usize {
        self.ref_nodes.len()
    }

    pub fn n_elems(&self) -> usize {
        self.connectivity.len()
    }

    pub fn element_length(&self, e: usize) -> f64 {
        let [a, b] = self.connectivity[e];
        self.ref_nodes[b] - self.ref_nodes[a]
    }
}

/// Static loads in reference units: a constant distributed force density over
/// the bar and a traction at the far end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loading {
    /// Distributed reference force density (Pa/m).
    pub body: f64,
    /// End traction (Pa).
    pub traction: f64,
}

/// A complete forward problem. Node 0 is fixed (`u = 0`); the traction acts
/// on the last node; the cross-section area is unit.
#[derive(Debug, Clone)]
pub struct ForwardProblem {
    pub mesh: Mesh1D,
    pub material: MaterialModel,
    pub loading: Loading,
}

/// Linear shape-function derivatives `(N_1,X, N_2,X) = (-1/l0, +1/l0)`.
pub fn shape_derivatives(element_length: f64) -> (f64, f64) {
    (-1.0 / element_length, 1.0 / element_length)
}

/// Linear shape-function values at `x` inside `[x1, x2]`.
pub fn shape_values(x1: f64, x2: f64, x: f64) -> (f64, f64) {
    let l0 = x2 - x1;
    ((x2 - x) / l0, (x - x1) / l0)
}

const GAUSS_2PT: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Element body-force integral `∫ N_i ρ0 b dX` by two-point Gauss quadrature
/// (exact for the linear integrand).
fn element_body_forces(x1: f64, x2: f64, body: f64) -> [f64; 2] {
    let half_len = 0.5 * (x2 - x1);
    let mid = 0.5 * (x1 + x2);
    let mut f = [0.0; 2];
    for xi in GAUSS_2PT {
        let x = mid + xi * half_len;
        let (n1, n2) = shape_values(x1, x2, x);
        f[0] += n1 * body * half_len;
        f[1] += n2 * body * half_len;
    }
    f
}

fn stretches(problem: &ForwardProblem, cur_nodes: &[f64]) -> Result<Vec<f64>, NonPositiveStretch> {
    let mesh = &problem.mesh;
    let mut lambdas = Vec::with_capacity(mesh.n_elems());
    for (e, [a, b]) in mesh.connectivity.iter().enumerate() {
        let lambda = (cur_nodes[*b] - cur_nodes[*a]) / mesh.element_length(e);
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(NonPositiveStretch);
        }
        lambdas.push(lambda);
    }
    Ok(lambdas)
}

fn internal_forces_full(
    problem: &ForwardProblem,
    cur_nodes: &[f64],
) -> Result<Vec<f64>, NonPositiveStretch> {
    let mesh = &problem.mesh;
    let mut f = vec![0.0; mesh.n_nodes()];
    for (e, [a, b]) in mesh.connectivity.iter().enumerate() {
        let lambda = (cur_nodes[*b] - cur_nodes[*a]) / mesh.element_length(e);
        let (p, _) = problem.material.stress(lambda)?;
        f[*a] -= p;
        f[*b] += p;
    }
    Ok(f)
}

fn external_forces_full(problem: &ForwardProblem) -> Vec<f64> {
    let mesh = &problem.mesh;
    let mut f = vec![0.0; mesh.n_nodes()];
    for [a, b] in &mesh.connectivity {
        let fe = element_body_forces(
            mesh.ref_nodes[*a],
            mesh.ref_nodes[*b],
            problem.loading.body,
        );
        f[*a] += fe[0];
        f[*b] += fe[1];
    }
    *f.last_mut().unwrap() += problem.loading.traction;
    f
}

/// Internal nodal forces gathered over the free nodes (node 0 dropped).
pub fn internal_forces(
    problem: &ForwardProblem,
    cur_nodes: &[f64],
) -> Result<Vec<f64>, NonPositiveStretch> {
    Ok(internal_forces_full(problem, cur_nodes)?[1..].to_vec())
}

/// External nodal forces over the free nodes.
pub fn external_forces(problem: &ForwardProblem) -> Vec<f64> {
    external_forces_full(problem)[1..].to_vec()
}

/// The equilibrium residual `F(x_free) = f_ext - f_int` as a solvable system
/// over the free nodal positions, with analytic tangent.
pub struct ForwardSystem<'a> {
    problem: &'a ForwardProblem,
}

impl ForwardSystem<'_> {
    fn full_coords(&self, free: &[f64]) -> Vec<f64> {
        let mut coords = Vec::with_capacity(free.len() + 1);
        coords.push(self.problem.mesh.ref_nodes[0]);
        coords.extend_from_slice(free);
        coords
    }
}

impl VectorSystem for ForwardSystem<'_> {
    fn dim(&self) -> usize {
        self.problem.mesh.n_nodes() - 1
    }

    fn eval(&self, free: &[f64]) -> Result<Vec<f64>, SystemError> {
        let coords = self.full_coords(free);
        let f_int = internal_forces_full(self.problem, &coords)
            .map_err(|_| SystemError::NonPositiveStretch)?;
        let f_ext = external_forces_full(self.problem);
        Ok((1..coords.len()).map(|i| f_ext[i] - f_int[i]).collect())
    }

    fn jacobian(&self, free: &[f64]) -> Result<Matrix, SystemError> {
        let coords = self.full_coords(free);
        let mesh = &self.problem.mesh;
        let n = self.dim();
        let mut jac = Matrix::zeros(n, n);
        for (e, [a, b]) in mesh.connectivity.iter().enumerate() {
            let l0 = mesh.element_length(e);
            let lambda = (coords[*b] - coords[*a]) / l0;
            let (_, dp) = self
                .problem
                .material
                .stress(lambda)
                .map_err(|_| SystemError::NonPositiveStretch)?;
            let k = dp / l0;
            // dF/dx = -df_int/dx; element stiffness couples its two nodes.
            for (gi, si) in [(*a, 1.0), (*b, -1.0)] {
                for (gj, sj) in [(*a, 1.0), (*b, -1.0)] {
                    if gi >= 1 && gj >= 1 {
                        jac[(gi - 1, gj - 1)] -= si * sj * k;
                    }
                }
            }
        }
        Ok(jac)
    }
}

pub fn forward_residual(problem: &ForwardProblem) -> ForwardSystem<'_> {
    ForwardSystem { problem }
}

/// Accepted configuration: current nodal positions with per-element stretch
/// and stress.
#[derive(Debug, Clone)]
pub struct DeformedState {
    pub cur_nodes: Vec<f64>,
    pub stretches: Vec<f64>,
    pub stresses: Vec<f64>,
}

impl DeformedState {
    pub fn total_length(&self) -> f64 {
        self.cur_nodes.last().unwrap() - self.cur_nodes.first().unwrap()
    }
}

fn state_from(
    problem: &ForwardProblem,
    free: &[f64],
) -> Result<DeformedState, NonPositiveStretch> {
    let mut coords = Vec::with_capacity(free.len() + 1);
    coords.push(problem.mesh.ref_nodes[0]);
    coords.extend_from_slice(free);
    let lambdas = stretches(problem, &coords)?;
    let stresses = lambdas
        .iter()
        .map(|&l| problem.material.stress(l).map(|(p, _)| p))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(DeformedState {
        cur_nodes: coords,
        stretches: lambdas,
        stresses,
    })
}

/// Which solver drives the forward analysis.
#[derive(Debug, Clone)]
pub enum ForwardMethod {
    NewtonRaphson,
    /// Extended Newton-Raphson with the given modification-point policy.
    Extended(CPolicy),
}

/// Default jitter magnitude for the `c = φX + ζ` rule, in metres.
///
/// The jitter has to separate the element stretches of the modification
/// configuration far enough that the internal-force differences at `c`
/// dominate the applied loads; below roughly a centimetre on the benchmark
/// bar, the modification denominators on the undeformed state are noise and
/// the very first step jumps onto the spurious stationary set at `x = c`.
pub const DEFAULT_JITTER_SCALE: f64 = 5e-2;

/// Termination thresholds for forward solves.
///
/// Equilibrium is declared on the force residual, at `0.001414` relative to
/// the initial out-of-balance magnitude, so bars loaded in pascals and in
/// megapascals terminate at the same relative accuracy. The step tolerance is
/// kept far below the geometric scale: a small nodal update alone (metres,
/// against residuals in force units) must not end the iteration.
pub fn equilibrium_tolerances(problem: &ForwardProblem) -> Tolerances {
    // At the undeformed start the internal forces vanish, so the initial
    // out-of-balance is the external force vector itself.
    let f0 = external_forces(problem);
    Tolerances {
        rel_step: 1e-12,
        abs_residual: 0.001414 * (1.0 + crate::numkit::norm2(&f0)),
        max_iters: 100,
        denom_guard: 1e-12,
    }
}

/// Jitter policy `c = φ X + ζ` over the free reference nodes.
pub fn reference_policy(
    problem: &ForwardProblem,
    phi: f64,
    jitter_scale: f64,
    seed: RngSeed,
) -> CPolicy {
    CPolicy::affine_of_reference(phi, &problem.mesh.ref_nodes[1..], jitter_scale, seed)
}

/// Solves the forward problem starting from the undeformed configuration.
///
/// A run only counts as converged when the final state actually equilibrates
/// (`‖f_ext - f_int‖ ≤ t_a`); an extended solve stalling on the spurious
/// stationary set of the modified system reports as exceeding the iteration
/// budget instead. The returned state is rebuilt from the last recorded
/// iterate, which by construction stayed in the admissible stretch range.
pub fn forward_solve(
    problem: &ForwardProblem,
    method: &ForwardMethod,
    tol: &Tolerances,
) -> (DeformedState, SolveTrace) {
    let system = forward_residual(problem);
    let x0 = problem.mesh.ref_nodes[1..].to_vec();
    let mut trace = match method {
        ForwardMethod::NewtonRaphson => newton_raphson(&system, &x0, tol),
        ForwardMethod::Extended(policy) => enr_solve(&system, &x0, policy, tol),
    };
    if trace.converged() && trace.final_residual_norm() > tol.abs_residual {
        trace.status = crate::rootfind::SolveStatus::MaxItersExceeded;
    }
    let state = state_from(problem, trace.final_iterate())
        .expect("recorded iterates stay in the admissible stretch range");
    (state, trace)
}

/// One row of a modification-parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiSweepEntry {
    pub phi: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Runs the extended solver for `φ` from `phi_start` to `phi_end` (inclusive)
/// in steps of `phi_step`, recording convergence and iteration counts.
pub fn phi_sweep(
    problem: &ForwardProblem,
    phi_start: f64,
    phi_end: f64,
    phi_step: f64,
    jitter_scale: f64,
    seed: RngSeed,
    tol: &Tolerances,
) -> Vec<PhiSweepEntry> {
    assert!(phi_step > 0.0 && phi_end >= phi_start);
    let steps = ((phi_end - phi_start) / phi_step).round() as usize;
    (0..=steps)
        .map(|k| {
            let phi = phi_start + k as f64 * phi_step;
            let policy = reference_policy(problem, phi, jitter_scale, seed.derive(k as u64));
            let (_, trace) = forward_solve(problem, &ForwardMethod::Extended(policy), tol);
            PhiSweepEntry {
                phi,
                converged: trace.converged(),
                iterations: trace.iterations(),
            }
        })
        .collect()
}

/// Fit model whose parameters are the material constants and whose input is
/// the stretch, evaluated directly on the constitutive law (the one-element
/// inverse problem).
pub struct InverseStressModel {
    family: MaterialFamily,
    true_params: Option<Vec<f64>>,
}

pub fn inverse_model(family: MaterialFamily, true_params: Option<Vec<f64>>) -> InverseStressModel {
    if let Some(p) = &true_params {
        assert_eq!(p.len(), family.param_count());
    }
    InverseStressModel {
        family,
        true_params,
    }
}

/// Pairs sampled stretches with observed stresses.
pub fn stress_observations(lambda_samples: &[f64], observed_p: &[f64]) -> Observations {
    assert_eq!(lambda_samples.len(), observed_p.len());
    Observations {
        inputs: lambda_samples.iter().map(|&l| vec![l]).collect(),
        outputs: observed_p.to_vec(),
        snr_db: None,
    }
}

impl FitModel for InverseStressModel {
    fn input_dims(&self) -> usize {
        1
    }

    fn param_count(&self) -> usize {
        self.family.param_count()
    }

    fn eval(&self, x: &[f64], theta: &[f64]) -> f64 {
        self.family.stress_raw(theta, x[0])
    }

    fn true_params(&self) -> Option<Vec<f64>> {
        self.true_params.clone()
    }

    fn param_gradient(&self, x: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
        let lambda = x[0];
        if !(lambda > 0.0) {
            return Some(vec![f64::NAN; self.param_count()]);
        }
        let inv2 = 1.0 / (lambda * lambda);
        let inv3 = inv2 / lambda;
        Some(match self.family {
            MaterialFamily::LinearElastic => vec![lambda - 1.0],
            MaterialFamily::MooneyRivlin => {
                let u = lambda - inv2;
                let v = 1.0 - inv3;
                vec![theta[1] * u + (1.0 - theta[1]) * v, theta[0] * (u - v)]
            }
            MaterialFamily::VerondaWestmann => {
                let u = lambda - inv2;
                let v = 1.0 - inv3;
                let g = lambda * lambda + 2.0 / lambda - 3.0;
                let eg = (theta[1] * g).exp();
                vec![2.0 * u * eg - v, 2.0 * theta[0] * u * g * eg]
            }
        })
    }

    fn param_hessian(&self, x: &[f64], theta: &[f64]) -> Option<Matrix> {
        let lambda = x[0];
        let p = self.param_count();
        if !(lambda > 0.0) {
            return Some(Matrix::from_fn(p, p, |_, _| f64::NAN));
        }
        let inv2 = 1.0 / (lambda * lambda);
        let inv3 = inv2 / lambda;
        Some(match self.family {
            MaterialFamily::LinearElastic => Matrix::zeros(1, 1),
            MaterialFamily::MooneyRivlin => {
                let u = lambda - inv2;
                let v = 1.0 - inv3;
                let mut h = Matrix::zeros(2, 2);
                h[(0, 1)] = u - v;
                h[(1, 0)] = u - v;
                h
            }
            MaterialFamily::VerondaWestmann => {
                let u = lambda - inv2;
                let g = lambda * lambda + 2.0 / lambda - 3.0;
                let eg = (theta[1] * g).exp();
                let mut h = Matrix::zeros(2, 2);
                h[(0, 1)] = 2.0 * u * g * eg;
                h[(1, 0)] = h[(0, 1)];
                h[(1, 1)] = 2.0 * theta[0] * u * g * g * eg;
                h
            }
        })
    }
}
