//! Run configuration and its TOML file form.
//!
//! Every key is optional; an empty file reproduces the reference setup
//! (T = 10, τ = 0.1, h = 0.1, u₁,₀ = 0.2, u₂,₀ = 0.5, θᵢ,₀ = 0, λᵢ = 1e-4,
//! γ_κ = 0.01, γ_δ = 0.001, γ_pH = 0.01).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::archive::read_field;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{Grid2D, TimeGrid};
use crate::imaging::PreprocessParams;
use crate::params::{Bounds, Interval};

/// Migration scalar factors. `gamma_kappa` scales the `u₁∇κ` advection flux,
/// `gamma_delta` the `δu₁∇u₂` pH-taxis flux, `gamma_ph` is the proton
/// diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalarFactors {
    pub gamma_kappa: f64,
    pub gamma_delta: f64,
    pub gamma_ph: f64,
}

impl Default for ScalarFactors {
    fn default() -> Self {
        Self {
            gamma_kappa: 0.01,
            gamma_delta: 0.001,
            gamma_ph: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialValue {
    Uniform(f64),
    Field(ScalarField),
}

impl InitialValue {
    pub fn to_field(&self, grid: Grid2D) -> Result<ScalarField> {
        match self {
            InitialValue::Uniform(v) => Ok(ScalarField::constant(grid, *v)),
            InitialValue::Field(f) => {
                if !f.grid().same_shape(&grid) {
                    return Err(Error::Shape("initial field grid differs from run grid".into()));
                }
                Ok(f.clone())
            }
        }
    }
}

/// Bounds and weight for the neutralizing control `ξ = (ξ₁, ξ₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub lambda_xi: f64,
    pub xi1: Interval,
    pub xi2: Interval,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            lambda_xi: 1e-4,
            xi1: Interval::new(0.0, 10.0),
            xi2: Interval::new(-10.0, 10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: Grid2D,
    pub time: TimeGrid,
    pub u1_init: InitialValue,
    pub u2_init: InitialValue,
    /// Tikhonov weights in `(σ, κ, δ, α, β, μ)` order.
    pub lambda: [f64; 6],
    /// Absolute stopping tolerance on Ĵ; `None` means `1e-4·‖O‖²`.
    pub epsilon: Option<f64>,
    pub factors: ScalarFactors,
    pub theta_init: [f64; 6],
    pub bounds: Bounds,
    pub max_iters: usize,
    pub seed: u64,
    pub control: ControlConfig,
}

impl RunConfig {
    /// Reference setup on the given grid.
    pub fn reference(grid: Grid2D) -> Self {
        Self {
            grid,
            time: TimeGrid::new(10.0, 100).expect("valid default time grid"),
            u1_init: InitialValue::Uniform(0.2),
            u2_init: InitialValue::Uniform(0.5),
            lambda: [1e-4; 6],
            epsilon: None,
            factors: ScalarFactors::default(),
            theta_init: [0.0; 6],
            bounds: Bounds::default(),
            max_iters: 200,
            seed: 0,
            control: ControlConfig::default(),
        }
    }

    pub fn with_time(mut self, final_time: f64, steps: usize) -> Result<Self> {
        self.time = TimeGrid::new(final_time, steps)?;
        Ok(self)
    }

    // Negated comparisons so that NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.lambda.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::Config(format!("lambda must be >= 0, got {:?}", self.lambda)));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) {
                return Err(Error::Config(format!("epsilon must be > 0, got {eps}")));
            }
        }
        if !(self.factors.gamma_ph > 0.0) {
            return Err(Error::Config(format!(
                "gamma_ph must be > 0, got {}",
                self.factors.gamma_ph
            )));
        }
        if !(self.control.lambda_xi >= 0.0) {
            return Err(Error::Config("lambda_xi must be >= 0".into()));
        }
        if self.control.xi1.lower < 0.0 || self.control.xi1.lower > self.control.xi1.upper {
            return Err(Error::Config("xi1 box must lie in [0, ∞)".into()));
        }
        if self.control.xi2.lower > self.control.xi2.upper {
            return Err(Error::Config("xi2 box is inverted".into()));
        }
        self.bounds.validate()?;
        for init in [&self.u1_init, &self.u2_init] {
            init.to_field(self.grid)?;
        }
        Ok(())
    }

    pub fn u1_init_field(&self) -> Result<ScalarField> {
        self.u1_init.to_field(self.grid)
    }

    pub fn u2_init_field(&self) -> Result<ScalarField> {
        self.u2_init.to_field(self.grid)
    }
}

/// Initial value as written in a config file: a number or a PFLD path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Uniform(f64),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoreSection {
    pub hx: f64,
    pub hy: f64,
    /// Grid size when no target archive fixes it.
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub final_time: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for CoreSection {
    fn default() -> Self {
        Self {
            hx: 0.1,
            hy: 0.1,
            nx: None,
            ny: None,
            final_time: 10.0,
            steps: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardSection {
    pub u1_init: InitialSpec,
    pub u2_init: InitialSpec,
    pub factors: ScalarFactors,
}

impl Default for ForwardSection {
    fn default() -> Self {
        Self {
            u1_init: InitialSpec::Uniform(0.2),
            u2_init: InitialSpec::Uniform(0.5),
            factors: ScalarFactors::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub lambda: [f64; 6],
    pub epsilon: Option<f64>,
    pub theta_init: [f64; 6],
    pub max_iters: usize,
    pub bounds: Bounds,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            lambda: [1e-4; 6],
            epsilon: None,
            theta_init: [0.0; 6],
            max_iters: 200,
            bounds: Bounds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    pub lambda_xi: f64,
    pub xi1: Interval,
    pub xi2: Interval,
    /// Neutral target archive; defaults to the uniform initial density.
    pub neutral_target: Option<PathBuf>,
}

impl Default for ControlSection {
    fn default() -> Self {
        let c = ControlConfig::default();
        Self {
            lambda_xi: c.lambda_xi,
            xi1: c.xi1,
            xi2: c.xi2,
            neutral_target: None,
        }
    }
}

impl ControlSection {
    pub fn config(&self) -> ControlConfig {
        ControlConfig {
            lambda_xi: self.lambda_xi,
            xi1: self.xi1,
            xi2: self.xi2,
        }
    }
}

/// Sectioned configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub core: CoreSection,
    pub forward: ForwardSection,
    pub optimizer: OptimizerSection,
    pub imaging: PreprocessParams,
    pub control: ControlSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Grid from `[core]`; `shape` (from a target archive) overrides nx/ny.
    pub fn grid(&self, shape: Option<(usize, usize)>) -> Result<Grid2D> {
        let (nx, ny) = match (shape, self.core.nx, self.core.ny) {
            (Some(s), _, _) => s,
            (None, Some(nx), Some(ny)) => (nx, ny),
            _ => {
                return Err(Error::Config(
                    "grid size unknown: give core.nx and core.ny or a target archive".into(),
                ))
            }
        };
        Grid2D::new(nx, ny, self.core.hx, self.core.hy)
    }

    /// Resolves files relative to `base` and builds a validated [`RunConfig`].
    pub fn run_config(&self, grid: Grid2D, base: &Path) -> Result<RunConfig> {
        let resolve = |spec: &InitialSpec| -> Result<InitialValue> {
            Ok(match spec {
                InitialSpec::Uniform(v) => InitialValue::Uniform(*v),
                InitialSpec::File(p) => InitialValue::Field(read_field(base.join(p))?),
            })
        };
        let cfg = RunConfig {
            grid,
            time: TimeGrid::new(self.core.final_time, self.core.steps)?,
            u1_init: resolve(&self.forward.u1_init)?,
            u2_init: resolve(&self.forward.u2_init)?,
            lambda: self.optimizer.lambda,
            epsilon: self.optimizer.epsilon,
            factors: self.forward.factors,
            theta_init: self.optimizer.theta_init,
            bounds: self.optimizer.bounds,
            max_iters: self.optimizer.max_iters,
            seed: self.core.seed,
            control: self.control.config(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
