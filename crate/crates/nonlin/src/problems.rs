//! Registry of benchmark systems and fit models.
//!
//! Every entry carries analytic derivatives and, where known, exact roots or
//! generating parameters, so the solvers and their finite-difference fallbacks
//! can be validated against an independent route.

use crate::minimize::{FitModel, Observations};
use crate::numkit::Matrix;
use crate::rootfind::{SystemError, VectorSystem};

/// A named root-finding benchmark with analytic Jacobian and known roots.
pub struct Benchmark {
    pub name: &'static str,
    dim: usize,
    f: fn(&[f64]) -> Result<Vec<f64>, SystemError>,
    jac: fn(&[f64]) -> Result<Matrix, SystemError>,
    pub known_roots: Vec<Vec<f64>>,
}

impl VectorSystem for Benchmark {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>, SystemError> {
        (self.f)(x)
    }
    fn jacobian(&self, x: &[f64]) -> Result<Matrix, SystemError> {
        (self.jac)(x)
    }
}

/// Cubic system with the three cube-roots-of-unity solutions:
/// `f1 = x0³ - 3 x0 x1² - 1`, `f2 = 3 x0² x1 - x1³`.
pub fn system_rf5() -> Benchmark {
    let half_sqrt3 = 3f64.sqrt() / 2.0;
    Benchmark {
        name: "rf5",
        dim: 2,
        f: |x| {
            Ok(vec![
                x[0] * x[0] * x[0] - 3.0 * x[0] * x[1] * x[1] - 1.0,
                3.0 * x[0] * x[0] * x[1] - x[1] * x[1] * x[1],
            ])
        },
        jac: |x| {
            Ok(Matrix::new(
                2,
                2,
                vec![
                    3.0 * x[0] * x[0] - 3.0 * x[1] * x[1],
                    -6.0 * x[0] * x[1],
                    6.0 * x[0] * x[1],
                    3.0 * x[0] * x[0] - 3.0 * x[1] * x[1],
                ],
            ))
        },
        known_roots: vec![
            vec![-0.5, half_sqrt3],
            vec![1.0, 0.0],
            vec![-0.5, -half_sqrt3],
        ],
    }
}

/// Exponential system `f1 = e^x0 - x1`, `f2 = x0 x1 - e^x0` with the single
/// root `(1, e)`.
pub fn system_exp() -> Benchmark {
    Benchmark {
        name: "exp",
        dim: 2,
        f: |x| {
            let e = x[0].exp();
            Ok(vec![e - x[1], x[0] * x[1] - e])
        },
        jac: |x| {
            let e = x[0].exp();
            Ok(Matrix::new(2, 2, vec![e, -1.0, x[1] - e, x[0]]))
        },
        known_roots: vec![vec![1.0, std::f64::consts::E]],
    }
}

/// Negative-exponent system `f1 = x0² - 1/x0 + x1`, `f2 = 1/x1 + x0`.
///
/// The coordinate axes are excluded; evaluation there reports a zero
/// division so basin maps paint those cells deterministically.
pub fn system_negexp() -> Benchmark {
    let cbrt2 = 2f64.cbrt();
    Benchmark {
        name: "negexp",
        dim: 2,
        f: |x| {
            if x[0] == 0.0 || x[1] == 0.0 {
                return Err(SystemError::ZeroDivision);
            }
            Ok(vec![x[0] * x[0] - 1.0 / x[0] + x[1], 1.0 / x[1] + x[0]])
        },
        jac: |x| {
            if x[0] == 0.0 || x[1] == 0.0 {
                return Err(SystemError::ZeroDivision);
            }
            Ok(Matrix::new(
                2,
                2,
                vec![
                    2.0 * x[0] + 1.0 / (x[0] * x[0]),
                    1.0,
                    1.0,
                    -1.0 / (x[1] * x[1]),
                ],
            ))
        },
        known_roots: vec![vec![cbrt2, -1.0 / cbrt2]],
    }
}

/// Scalar cubic `f(x) = x³ + x² - 2x` with roots `{-2, 0, 1}`.
pub fn scalar_cubic() -> Benchmark {
    Benchmark {
        name: "cubic",
        dim: 1,
        f: |x| Ok(vec![x[0] * x[0] * x[0] + x[0] * x[0] - 2.0 * x[0]]),
        jac: |x| Ok(Matrix::new(1, 1, vec![3.0 * x[0] * x[0] + 2.0 * x[0] - 2.0])),
        known_roots: vec![vec![-2.0], vec![0.0], vec![1.0]],
    }
}

pub fn system_by_name(name: &str) -> Option<Benchmark> {
    match name {
        "rf5" => Some(system_rf5()),
        "exp" => Some(system_exp()),
        "negexp" => Some(system_negexp()),
        "cubic" => Some(scalar_cubic()),
        _ => None,
    }
}

/// Real-part power convention: for a negative base raised to a non-integer
/// exponent, only the real part of the principal complex value is kept.
/// `Re((-a)^e) = a^e cos(πe)` for `a > 0`.
pub fn real_part_pow(x: f64, e: f64) -> f64 {
    if x >= 0.0 {
        x.powf(e)
    } else {
        (-x).powf(e) * (std::f64::consts::PI * e).cos()
    }
}

fn real_part_pow_de(x: f64, e: f64) -> f64 {
    if x > 0.0 {
        x.powf(e) * x.ln()
    } else if x == 0.0 {
        0.0
    } else {
        let a = -x;
        let pi = std::f64::consts::PI;
        a.powf(e) * (a.ln() * (pi * e).cos() - pi * (pi * e).sin())
    }
}

fn real_part_pow_dee(x: f64, e: f64) -> f64 {
    if x > 0.0 {
        let l = x.ln();
        x.powf(e) * l * l
    } else if x == 0.0 {
        0.0
    } else {
        let a = -x;
        let pi = std::f64::consts::PI;
        let l = a.ln();
        a.powf(e) * ((l * l - pi * pi) * (pi * e).cos() - 2.0 * pi * l * (pi * e).sin())
    }
}

/// Quintic-parameter family behind the first two fit benchmarks. With
/// `powered` the parameters enter through cubes and squares, which makes the
/// residual curvature nonzero.
pub struct PolySineModel {
    powered: bool,
}

impl FitModel for PolySineModel {
    fn input_dims(&self) -> usize {
        1
    }
    fn param_count(&self) -> usize {
        5
    }
    fn eval(&self, x: &[f64], t: &[f64]) -> f64 {
        let x = x[0];
        if self.powered {
            t[0].powi(3) * x.powi(3)
                + t[1].powi(2) * x.powi(2)
                + t[2].powi(2) * x
                + t[3].powi(3)
                + t[4] * x.sin()
        } else {
            t[0] * x.powi(3) + t[1] * x.powi(2) + t[2] * x + t[3] + t[4] * x.sin()
        }
    }
    fn true_params(&self) -> Option<Vec<f64>> {
        Some(vec![-0.001, 0.1, 0.1, 2.0, 15.0])
    }
    fn param_gradient(&self, x: &[f64], t: &[f64]) -> Option<Vec<f64>> {
        let x = x[0];
        Some(if self.powered {
            vec![
                3.0 * t[0] * t[0] * x.powi(3),
                2.0 * t[1] * x.powi(2),
                2.0 * t[2] * x,
                3.0 * t[3] * t[3],
                x.sin(),
            ]
        } else {
            vec![x.powi(3), x.powi(2), x, 1.0, x.sin()]
        })
    }
    fn param_hessian(&self, x: &[f64], t: &[f64]) -> Option<Matrix> {
        let x = x[0];
        let mut h = Matrix::zeros(5, 5);
        if self.powered {
            h[(0, 0)] = 6.0 * t[0] * x.powi(3);
            h[(1, 1)] = 2.0 * x.powi(2);
            h[(2, 2)] = 2.0 * x;
            h[(3, 3)] = 6.0 * t[3];
        }
        Some(h)
    }
}

/// Two-input power-law model `f = θ0 x0^θ1 + θ2 x1^θ3` with the real-part
/// convention for negative bases.
pub struct PowerLawModel;

impl FitModel for PowerLawModel {
    fn input_dims(&self) -> usize {
        2
    }
    fn param_count(&self) -> usize {
        4
    }
    fn eval(&self, x: &[f64], t: &[f64]) -> f64 {
        t[0] * real_part_pow(x[0], t[1]) + t[2] * real_part_pow(x[1], t[3])
    }
    fn true_params(&self) -> Option<Vec<f64>> {
        Some(vec![0.1, 4.0, 0.1, 2.0])
    }
    fn param_gradient(&self, x: &[f64], t: &[f64]) -> Option<Vec<f64>> {
        Some(vec![
            real_part_pow(x[0], t[1]),
            t[0] * real_part_pow_de(x[0], t[1]),
            real_part_pow(x[1], t[3]),
            t[2] * real_part_pow_de(x[1], t[3]),
        ])
    }
    fn param_hessian(&self, x: &[f64], t: &[f64]) -> Option<Matrix> {
        let mut h = Matrix::zeros(4, 4);
        h[(0, 1)] = real_part_pow_de(x[0], t[1]);
        h[(1, 0)] = h[(0, 1)];
        h[(1, 1)] = t[0] * real_part_pow_dee(x[0], t[1]);
        h[(2, 3)] = real_part_pow_de(x[1], t[3]);
        h[(3, 2)] = h[(2, 3)];
        h[(3, 3)] = t[2] * real_part_pow_dee(x[1], t[3]);
        Some(h)
    }
}

/// Two-input decaying-exponential model `f = θ0 e^(-x0/θ1) + θ2 e^(-x1/θ3)`.
/// The parameter axes `θ1 = 0` and `θ3 = 0` are poles.
pub struct ExpDecayModel;

impl FitModel for ExpDecayModel {
    fn input_dims(&self) -> usize {
        2
    }
    fn param_count(&self) -> usize {
        4
    }
    fn eval(&self, x: &[f64], t: &[f64]) -> f64 {
        t[0] * (-x[0] / t[1]).exp() + t[2] * (-x[1] / t[3]).exp()
    }
    fn true_params(&self) -> Option<Vec<f64>> {
        Some(vec![4.0, 2.0, 1.0, 10.0])
    }
    fn param_gradient(&self, x: &[f64], t: &[f64]) -> Option<Vec<f64>> {
        let e1 = (-x[0] / t[1]).exp();
        let e2 = (-x[1] / t[3]).exp();
        Some(vec![
            e1,
            t[0] * e1 * x[0] / (t[1] * t[1]),
            e2,
            t[2] * e2 * x[1] / (t[3] * t[3]),
        ])
    }
    fn param_hessian(&self, x: &[f64], t: &[f64]) -> Option<Matrix> {
        let e1 = (-x[0] / t[1]).exp();
        let e2 = (-x[1] / t[3]).exp();
        let mut h = Matrix::zeros(4, 4);
        h[(0, 1)] = e1 * x[0] / (t[1] * t[1]);
        h[(1, 0)] = h[(0, 1)];
        h[(1, 1)] = t[0]
            * e1
            * (x[0] * x[0] / t[1].powi(4) - 2.0 * x[0] / t[1].powi(3));
        h[(2, 3)] = e2 * x[1] / (t[3] * t[3]);
        h[(3, 2)] = h[(2, 3)];
        h[(3, 3)] = t[2]
            * e2
            * (x[1] * x[1] / t[3].powi(4) - 2.0 * x[1] / t[3].powi(3));
        Some(h)
    }
}

/// Cantilever tip-load deflection `y(x) = P x² (3L - x) / (6 E I)`.
///
/// The fitted parameter is the second moment of area in cm⁴ and the returned
/// deflection is in millimetres, matching the observation table's units;
/// internally everything is SI with 1 cm⁴ = 1e-8 m⁴. Non-positive parameters
/// evaluate to NaN, which the fit layer reports as a non-finite model.
pub struct BeamModel;

/// Beam constants: modulus 200 GPa, length 2 m, end load 10 kN.
impl BeamModel {
    pub const MODULUS: f64 = 200e9;
    pub const LENGTH: f64 = 2.0;
    pub const LOAD: f64 = 10e3;

    fn deflection_mm(x: f64, theta_cm4: f64) -> f64 {
        if theta_cm4 <= 0.0 {
            return f64::NAN;
        }
        let inertia = theta_cm4 * 1e-8;
        let metres = Self::LOAD * x * x * (3.0 * Self::LENGTH - x)
            / (6.0 * Self::MODULUS * inertia);
        metres * 1e3
    }
}

impl FitModel for BeamModel {
    fn input_dims(&self) -> usize {
        1
    }
    fn param_count(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], t: &[f64]) -> f64 {
        Self::deflection_mm(x[0], t[0])
    }
    fn true_params(&self) -> Option<Vec<f64>> {
        Some(vec![2340.0])
    }
    fn param_gradient(&self, x: &[f64], t: &[f64]) -> Option<Vec<f64>> {
        Some(vec![-Self::deflection_mm(x[0], t[0]) / t[0]])
    }
    fn param_hessian(&self, x: &[f64], t: &[f64]) -> Option<Matrix> {
        Some(Matrix::new(
            1,
            1,
            vec![2.0 * Self::deflection_mm(x[0], t[0]) / (t[0] * t[0])],
        ))
    }
}

pub fn beam_model() -> BeamModel {
    BeamModel
}

/// The five fixed measurements of the cantilever's deflection (x in metres,
/// y in millimetres).
pub fn beam_observations() -> Observations {
    Observations {
        inputs: vec![vec![0.0], vec![0.5], vec![1.0], vec![1.5], vec![2.0]],
        outputs: vec![0.000, 0.490, 1.781, 3.606, 5.698],
        snr_db: None,
    }
}

/// A registered fit model with its sampling range.
pub struct ModelEntry {
    pub name: &'static str,
    pub model: Box<dyn FitModel + Send + Sync>,
    pub sampling_range: Vec<(f64, f64)>,
}

/// The four synthetic fit benchmarks.
pub fn models_gn() -> Vec<ModelEntry> {
    vec![
        ModelEntry {
            name: "gn1",
            model: Box::new(PolySineModel { powered: false }),
            sampling_range: vec![(1.0, 10.0)],
        },
        ModelEntry {
            name: "gn2",
            model: Box::new(PolySineModel { powered: true }),
            sampling_range: vec![(1.0, 10.0)],
        },
        ModelEntry {
            name: "gn3",
            model: Box::new(PowerLawModel),
            sampling_range: vec![(1.0, 10.0), (1.0, 10.0)],
        },
        ModelEntry {
            name: "gn4",
            model: Box::new(ExpDecayModel),
            sampling_range: vec![(0.1, 10.0), (0.1, 10.0)],
        },
    ]
}

pub fn model_by_name(name: &str) -> Option<ModelEntry> {
    match name {
        "gn1" | "gn2" | "gn3" | "gn4" => models_gn().into_iter().find(|e| e.name == name),
        "beam" => Some(ModelEntry {
            name: "beam",
            model: Box::new(BeamModel),
            sampling_range: vec![(0.0, 2.0)],
        }),
        _ => None,
    }
}
