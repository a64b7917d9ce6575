//! JSON experiment configurations.
//!
//! Every subcommand reads one of these structures from `--config PATH`; the
//! `--seed` flag and the `NONLIN_SEED` environment variable override the
//! seed recorded in the file (flag wins). Unknown fields are rejected so a
//! typo in a config cannot silently fall back to a default.

use nonlin::fem1d::{self, ForwardProblem, Loading, MaterialFamily, Mesh1D};
use nonlin::rootfind::{CPolicy, Tolerances};
use serde::Deserialize;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn fail<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Modification-point rule, as written in config files.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    /// `c_i = phi * x_i`
    Scalar { phi: f64 },
    /// `c_i = phi_i * x_i`
    PerAxis { phi: Vec<f64> },
    /// `c_i = x_i + delta`
    Offset { delta: f64 },
    /// fixed modification point
    Constant { c: Vec<f64> },
}

impl PolicySpec {
    pub fn to_policy(&self, dim: usize) -> Result<CPolicy, ConfigError> {
        Ok(match self {
            PolicySpec::Scalar { phi } => CPolicy::Scalar(*phi),
            PolicySpec::PerAxis { phi } => {
                if phi.len() != dim {
                    return fail(format!("per_axis policy needs {dim} factors"));
                }
                CPolicy::PerAxis(phi.clone())
            }
            PolicySpec::Offset { delta } => CPolicy::Offset(*delta),
            PolicySpec::Constant { c } => {
                if c.len() != dim {
                    return fail(format!("constant policy needs {dim} components"));
                }
                CPolicy::Constant(c.clone())
            }
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub rel_step: f64,
    pub abs_residual: f64,
    pub max_iters: usize,
}

impl ToleranceSpec {
    pub fn to_tolerances(&self) -> Result<Tolerances, ConfigError> {
        if !(self.rel_step > 0.0 && self.abs_residual > 0.0 && self.max_iters >= 1) {
            return fail("tolerances must be positive with at least one iteration");
        }
        Ok(Tolerances::new(
            self.rel_step,
            self.abs_residual,
            self.max_iters,
        ))
    }
}

fn default_resolution() -> [usize; 2] {
    [128, 128]
}

fn default_range() -> [[f64; 2]; 2] {
    [[-50.0, 50.0], [-50.0, 50.0]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootMethod {
    Nr,
    Enr,
    Ds,
}

/// Basin-of-attraction map configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinConfig {
    pub problem: String,
    pub method: RootMethod,
    #[serde(default)]
    pub policy: Option<PolicySpec>,
    #[serde(default = "default_range")]
    pub range: [[f64; 2]; 2],
    #[serde(default = "default_resolution")]
    pub resolution: [usize; 2],
    #[serde(default)]
    pub tolerances: Option<ToleranceSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl BasinConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if nonlin::problems::system_by_name(&self.problem).is_none() {
            return fail(format!("unknown problem {:?}", self.problem));
        }
        if self.resolution.contains(&0) {
            return fail("resolution must be positive");
        }
        for axis in &self.range {
            if !(axis[0] < axis[1]) {
                return fail("range bounds must be increasing");
            }
        }
        match self.method {
            RootMethod::Enr if self.policy.is_none() => {
                fail("the extended method needs a policy")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Gn,
    Cgn,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub log10_min: f64,
    pub log10_max: f64,
    pub count: usize,
}

impl LogRange {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![10f64.powf(self.log10_min)];
        }
        (0..self.count)
            .map(|i| {
                let t = i as f64 / (self.count - 1) as f64;
                10f64.powf(self.log10_min + t * (self.log10_max - self.log10_min))
            })
            .collect()
    }
}

/// Distance × noise fit grid configuration. A `null` entry in `snr_db` is
/// the noiseless row.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinGridConfig {
    pub model: String,
    pub method: FitMethod,
    pub distances: LogRange,
    pub snr_db: Vec<Option<f64>>,
    #[serde(default = "default_observations")]
    pub observations: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_observations() -> usize {
    20
}

impl MinGridConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if nonlin::problems::model_by_name(&self.model).is_none() {
            return fail(format!("unknown model {:?}", self.model));
        }
        if self.distances.count == 0 || self.snr_db.is_empty() {
            return fail("grid axes must be non-empty");
        }
        if self.observations == 0 {
            return fail("observations must be positive");
        }
        Ok(())
    }
}

/// Rate/order report configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateOrderConfig {
    pub model: String,
    pub theta0: Vec<f64>,
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default = "default_observations")]
    pub observations: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl RateOrderConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let entry = match nonlin::problems::model_by_name(&self.model) {
            Some(e) => e,
            None => return fail(format!("unknown model {:?}", self.model)),
        };
        if self.theta0.len() != entry.model.param_count() {
            return fail(format!(
                "theta0 needs {} components",
                entry.model.param_count()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaterialFamilySpec {
    LinearElastic,
    MooneyRivlin,
    VerondaWestmann,
}

impl MaterialFamilySpec {
    pub fn family(&self) -> MaterialFamily {
        match self {
            MaterialFamilySpec::LinearElastic => MaterialFamily::LinearElastic,
            MaterialFamilySpec::MooneyRivlin => MaterialFamily::MooneyRivlin,
            MaterialFamilySpec::VerondaWestmann => MaterialFamily::VerondaWestmann,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub family: MaterialFamilySpec,
    pub params: Vec<f64>,
}

fn default_n_elems() -> usize {
    5
}

fn default_length() -> f64 {
    2.0
}

fn default_jitter_scale() -> f64 {
    fem1d::DEFAULT_JITTER_SCALE
}

/// Forward bar analysis configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FemForwardConfig {
    pub material: MaterialSpec,
    pub body: f64,
    pub traction: f64,
    #[serde(default = "default_n_elems")]
    pub n_elems: usize,
    #[serde(default = "default_length")]
    pub length: f64,
    pub method: RootMethod,
    #[serde(default)]
    pub phi: Option<f64>,
    #[serde(default = "default_jitter_scale")]
    pub jitter_scale: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl FemForwardConfig {
    pub fn problem(&self) -> Result<ForwardProblem, ConfigError> {
        if self.material.params.len() != self.material.family.family().param_count() {
            return fail(format!(
                "material family {:?} needs {} parameters",
                self.material.family.family().name(),
                self.material.family.family().param_count()
            ));
        }
        let material = self
            .material
            .family
            .family()
            .material(&self.material.params)
            .map_err(|e| ConfigError(e.to_string()))?;
        if self.n_elems == 0 || !(self.length > 0.0) {
            return fail("mesh needs at least one element of positive length");
        }
        Ok(ForwardProblem {
            mesh: Mesh1D::uniform(self.n_elems, self.length),
            material,
            loading: Loading {
                body: self.body,
                traction: self.traction,
            },
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.problem()?;
        match self.method {
            RootMethod::Enr if self.phi.is_none() => fail("the extended method needs phi"),
            RootMethod::Ds => fail("fem-forward supports nr and enr"),
            _ => Ok(()),
        }
    }
}

/// Inverse constitutive fit configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FemInverseConfig {
    pub family: MaterialFamilySpec,
    pub true_params: Vec<f64>,
    pub lambda_range: [f64; 2],
    #[serde(default = "default_inverse_samples")]
    pub samples: usize,
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// Relative offset applied to the true parameters for the starting
    /// guess.
    #[serde(default = "default_guess_scale")]
    pub guess_scale: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_inverse_samples() -> usize {
    10
}

fn default_guess_scale() -> f64 {
    1.15
}

impl FemInverseConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.true_params.len() != self.family.family().param_count() {
            return fail(format!(
                "{} needs {} parameters",
                self.family.family().name(),
                self.family.family().param_count()
            ));
        }
        if !(self.lambda_range[0] > 0.0 && self.lambda_range[0] < self.lambda_range[1]) {
            return fail("lambda range must be positive and increasing");
        }
        if self.samples < self.true_params.len() {
            return fail("need at least as many samples as parameters");
        }
        Ok(())
    }
}

/// Modification-parameter sweep configuration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSweepConfig {
    pub material: MaterialSpec,
    pub body: f64,
    pub traction: f64,
    #[serde(default = "default_n_elems")]
    pub n_elems: usize,
    #[serde(default = "default_length")]
    pub length: f64,
    pub phi_start: f64,
    pub phi_end: f64,
    pub phi_step: f64,
    #[serde(default = "default_jitter_scale")]
    pub jitter_scale: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl PhiSweepConfig {
    pub fn forward(&self) -> FemForwardConfig {
        FemForwardConfig {
            material: self.material.clone(),
            body: self.body,
            traction: self.traction,
            n_elems: self.n_elems,
            length: self.length,
            method: RootMethod::Enr,
            phi: Some(self.phi_start),
            jitter_scale: self.jitter_scale,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.forward().problem()?;
        if !(self.phi_step > 0.0 && self.phi_end >= self.phi_start) {
            return fail("phi range must be increasing with a positive step");
        }
        Ok(())
    }
}

/// Resolves the run seed: flag, then config, then `NONLIN_SEED`, then zero.
pub fn resolve_seed(flag: Option<u64>, config_seed: Option<u64>) -> u64 {
    flag.or(config_seed)
        .or_else(|| {
            std::env::var("NONLIN_SEED")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0)
}

pub fn load_config<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}
