//! Neutralizing controls and pattern synthesis.
//!
//! The controlled system adds `−ξ₁u₁` to the tumour equation and `+ξ₂u₂`
//! to the proton equation. Neutralization minimizes
//!
//! ```text
//! ½‖u₁(T) − Z‖² + (λ_ξ/2)(‖ξ₁‖² + ‖ξ₂‖²)
//! ```
//!
//! over boxed `ξ` with θ held fixed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adjoint::integrate_backward;
use crate::config::{ControlConfig, RunConfig};
use crate::descent::{self, CostReport, DescentProblem, DescentSettings, IterationRecord, StopReason};
use crate::error::{Error, Result};
use crate::field::{FieldSeries, ScalarField};
use crate::forward::{integrate, StateTrajectory};
use crate::optimizer::{assemble_levels, effective_epsilon, RunSummary, METRIC_EPS};
use crate::params::{Component, Interval, ParamSet};
use crate::scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// Both ξ₁ and ξ₂ are optimized.
    Full,
    /// ξ₁ is frozen at zero.
    PhOnly,
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlMode::Full => "full",
            ControlMode::PhOnly => "ph-only",
        })
    }
}

impl FromStr for ControlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ControlMode::Full),
            "ph-only" | "ph" => Ok(ControlMode::PhOnly),
            _ => Err(Error::Config(format!("unknown control mode {s:?} (expected full or ph-only)"))),
        }
    }
}

/// `ξ = (ξ₁, ξ₂)` on the parameter space-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSet {
    pub xi1: FieldSeries,
    pub xi2: FieldSeries,
    pub mode: ControlMode,
    pub lambda_xi: f64,
}

impl ControlSet {
    pub fn new(xi1: FieldSeries, xi2: FieldSeries, mode: ControlMode, lambda_xi: f64) -> Result<Self> {
        xi1.check_shape(&xi2)?;
        Ok(Self {
            xi1,
            xi2,
            mode,
            lambda_xi,
        })
    }

    pub fn zeros(template: &ParamSet, mode: ControlMode, lambda_xi: f64) -> Self {
        let z = FieldSeries::constant(*template.grid(), *template.time(), 0.0);
        Self {
            xi1: z.clone(),
            xi2: z,
            mode,
            lambda_xi,
        }
    }

    pub fn uniform(template: &ParamSet, xi1: f64, xi2: f64, mode: ControlMode, lambda_xi: f64) -> Self {
        let (g, t) = (*template.grid(), *template.time());
        Self {
            xi1: FieldSeries::constant(g, t, xi1),
            xi2: FieldSeries::constant(g, t, xi2),
            mode,
            lambda_xi,
        }
    }

    /// `(λ_ξ/2)(‖ξ₁‖² + ‖ξ₂‖²)`.
    pub fn regularization(&self) -> f64 {
        0.5 * self.lambda_xi * (self.xi1.norm_sq() + self.xi2.norm_sq())
    }

    /// Clamps into the boxes; ph-only mode zeroes ξ₁.
    pub fn projected(&self, cfg: &ControlConfig) -> ControlSet {
        let clamp = |s: &FieldSeries, b: Interval| s.map(move |v| b.clamp(v));
        let xi1 = match self.mode {
            ControlMode::Full => clamp(&self.xi1, cfg.xi1),
            ControlMode::PhOnly => self.xi1.map(|_| 0.0),
        };
        ControlSet {
            xi1,
            xi2: clamp(&self.xi2, cfg.xi2),
            mode: self.mode,
            lambda_xi: self.lambda_xi,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.xi1.norm_sq() + self.xi2.norm_sq()).sqrt()
    }

    fn offset(&self, a: f64, dir: &ControlSet) -> Result<ControlSet> {
        Ok(ControlSet {
            xi1: self.xi1.zip_map(&dir.xi1, move |x, d| x + a * d)?,
            xi2: self.xi2.zip_map(&dir.xi2, move |x, d| x + a * d)?,
            mode: self.mode,
            lambda_xi: self.lambda_xi,
        })
    }

    fn check_against(&self, theta: &ParamSet) -> Result<()> {
        theta.get(Component::Sigma).check_shape(&self.xi1)
    }
}

/// State solve with the two control reaction terms.
pub fn solve_forward_controlled(theta: &ParamSet, xi: &ControlSet, cfg: &RunConfig) -> Result<StateTrajectory> {
    xi.check_against(theta)?;
    integrate(theta, Some((&xi.xi1, &xi.xi2)), cfg)
}

/// Neutralization cost of an already computed controlled trajectory.
pub fn control_cost(traj: &StateTrajectory, xi: &ControlSet, target: &ScalarField) -> Result<CostReport> {
    let misfit = traj.final_u1().sub(target)?;
    Ok(CostReport::new(0.5 * misfit.norm_l2().powi(2), xi.regularization()))
}

/// Gradient of the neutralization cost with respect to `ξ`; the ξ₁ part
/// is zero in ph-only mode.
pub fn control_gradient(
    theta: &ParamSet,
    xi: &ControlSet,
    traj: &StateTrajectory,
    target: &ScalarField,
    cfg: &RunConfig,
) -> Result<ControlSet> {
    let adj = integrate_backward(traj, theta, Some((&xi.xi1, &xi.xi2)), target, &cfg.factors)?;
    let [g1, g2] = assemble_levels(
        traj,
        &adj,
        [&xi.xi1, &xi.xi2],
        [xi.lambda_xi; 2],
        |_, u1, u2, q1, q2, [o1, o2]| scheme::control_sensitivity(u1, u2, q1, q2, o1, o2),
    )?;
    let g1 = match xi.mode {
        ControlMode::Full => g1,
        ControlMode::PhOnly => g1.map(|_| 0.0),
    };
    ControlSet::new(g1, g2, xi.mode, xi.lambda_xi)
}

#[derive(Debug, Clone)]
pub struct NeutralizeResult {
    pub xi: ControlSet,
    pub trajectory: StateTrajectory,
    pub history: Vec<IterationRecord>,
    pub stop: StopReason,
    pub stationarity: f64,
}

impl NeutralizeResult {
    pub fn accepted_steps(&self) -> usize {
        self.history.len() - 1
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            stop: self.stop,
            iterations: self.accepted_steps(),
            initial_cost: self.history[0].cost.total,
            final_cost: self.history.last().expect("non-empty").cost.total,
            stationarity: self.stationarity,
        }
    }
}

struct NeutralizeProblem<'a> {
    theta: &'a ParamSet,
    target: &'a ScalarField,
    cfg: &'a RunConfig,
}

impl DescentProblem for NeutralizeProblem<'_> {
    type Point = ControlSet;

    fn target(&self) -> &ScalarField {
        self.target
    }

    fn evaluate(&self, x: &ControlSet) -> Result<(CostReport, StateTrajectory)> {
        let traj = solve_forward_controlled(self.theta, x, self.cfg)?;
        Ok((control_cost(&traj, x, self.target)?, traj))
    }

    fn gradient(&self, x: &ControlSet, state: &StateTrajectory) -> Result<ControlSet> {
        control_gradient(self.theta, x, state, self.target, self.cfg)
    }

    fn step(&self, x: &ControlSet, g: &ControlSet, gamma: f64) -> Result<ControlSet> {
        Ok(x.offset(-gamma, g)?.projected(&self.cfg.control))
    }

    fn project(&self, x: &ControlSet) -> ControlSet {
        x.projected(&self.cfg.control)
    }

    fn relative_distance(&self, x: &ControlSet, y: &ControlSet) -> Result<f64> {
        Ok(x.offset(-1.0, y)?.norm() / x.norm().max(f64::MIN_POSITIVE))
    }
}

/// Projected gradient descent over `ξ` from zero, with θ frozen.
pub fn neutralize(
    theta_hat: &ParamSet,
    neutral_target: &ScalarField,
    cfg: &RunConfig,
    mode: ControlMode,
) -> Result<NeutralizeResult> {
    let start = ControlSet::zeros(theta_hat, mode, cfg.control.lambda_xi);
    neutralize_from(theta_hat, &start, neutral_target, cfg)
}

pub fn neutralize_from(
    theta_hat: &ParamSet,
    start: &ControlSet,
    neutral_target: &ScalarField,
    cfg: &RunConfig,
) -> Result<NeutralizeResult> {
    cfg.validate()?;
    start.check_against(theta_hat)?;
    if !neutral_target.grid().same_shape(&cfg.grid) {
        return Err(Error::Shape("neutral target grid differs from run grid".into()));
    }
    let problem = NeutralizeProblem {
        theta: theta_hat,
        target: neutral_target,
        cfg,
    };
    let settings = DescentSettings {
        max_iters: cfg.max_iters,
        epsilon: effective_epsilon(cfg, neutral_target),
        metric_eps: METRIC_EPS,
    };
    let out = descent::run(&problem, start, &settings)?;
    Ok(NeutralizeResult {
        xi: out.point,
        trajectory: out.trajectory,
        history: out.history,
        stop: out.stop,
        stationarity: out.stationarity,
    })
}

fn check_weights(n: usize, weights: &[f64]) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("nothing to combine".into()));
    }
    if weights.len() != n {
        return Err(Error::Config(format!("{} weights for {n} inputs", weights.len())));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Config("weights must be finite".into()));
    }
    Ok(())
}

fn weighted(series: &[&FieldSeries], weights: &[f64]) -> Result<FieldSeries> {
    let mut acc = series[0].map(|v| v * weights[0]);
    for (s, &w) in series.iter().zip(weights).skip(1) {
        acc = acc.zip_map(s, move |a, v| a + w * v)?;
    }
    Ok(acc)
}

/// `Σ wₖ θₖ` per component and level, projected into the first input's box.
pub fn combine_params(sets: &[ParamSet], weights: &[f64]) -> Result<ParamSet> {
    check_weights(sets.len(), weights)?;
    for s in &sets[1..] {
        sets[0].check_shape(s)?;
    }
    let mut out = sets[0].clone();
    for c in Component::ALL {
        let parts: Vec<&FieldSeries> = sets.iter().map(|s| s.get(c)).collect();
        out.set(c, weighted(&parts, weights)?)?;
    }
    out.project_in_place();
    Ok(out)
}

/// Equal-weight mean of two parameter sets.
pub fn mean_params(k: &ParamSet, l: &ParamSet) -> Result<ParamSet> {
    combine_params(&[k.clone(), l.clone()], &[0.5, 0.5])
}

/// `Σ wₖ ξₖ`, projected with the given caps. Mode and weight are taken
/// from the first input.
pub fn combine_controls(sets: &[ControlSet], weights: &[f64], caps: &ControlConfig) -> Result<ControlSet> {
    check_weights(sets.len(), weights)?;
    let xi1: Vec<&FieldSeries> = sets.iter().map(|s| &s.xi1).collect();
    let xi2: Vec<&FieldSeries> = sets.iter().map(|s| &s.xi2).collect();
    let out = ControlSet::new(
        weighted(&xi1, weights)?,
        weighted(&xi2, weights)?,
        sets[0].mode,
        sets[0].lambda_xi,
    )?;
    let mode = if sets.iter().all(|s| s.mode == ControlMode::PhOnly) {
        ControlMode::PhOnly
    } else {
        ControlMode::Full
    };
    Ok(ControlSet { mode, ..out }.projected(caps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::InitialValue;
    use crate::forward::solve_forward;
    use crate::grid::Grid2D;
    use crate::params::Bounds;

    fn setup() -> (RunConfig, ParamSet) {
        let mut cfg = RunConfig::reference(Grid2D::square(8, 8, 0.1).unwrap())
            .with_time(1.0, 10)
            .unwrap();
        cfg.u1_init = InitialValue::Field(ScalarField::from_fn(cfg.grid, |x, y| 0.2 + 0.2 * (4.0 * x).cos() * y));
        let theta = ParamSet::uniform(cfg.grid, cfg.time, [0.005, 0.002, 0.004, 1.0, 0.5, 2.0], Bounds::default());
        (cfg, theta)
    }

    #[test]
    fn zero_control_is_bitwise_uncontrolled() {
        let (cfg, theta) = setup();
        let xi = ControlSet::zeros(&theta, ControlMode::Full, 1e-4);
        assert_eq!(
            solve_forward_controlled(&theta, &xi, &cfg).unwrap(),
            solve_forward(&theta, &cfg).unwrap()
        );
    }

    #[test]
    fn kill_rate_recurrence() {
        let mut cfg = RunConfig::reference(Grid2D::square(5, 5, 0.1).unwrap())
            .with_time(0.1, 1)
            .unwrap();
        cfg.u1_init = InitialValue::Uniform(0.3);
        let theta = ParamSet::uniform(cfg.grid, cfg.time, [0.0; 6], Bounds::default());
        let xi = ControlSet::uniform(&theta, 1.0, 0.0, ControlMode::Full, 0.0);
        let traj = solve_forward_controlled(&theta, &xi, &cfg).unwrap();
        assert!(traj.final_u1().values().iter().all(|&v| (v - 0.27).abs() < 1e-15));
    }

    #[test]
    fn capped_kill_rate_reduces_mass() {
        let (cfg, theta) = setup();
        let xi = ControlSet::uniform(&theta, 10.0, 0.0, ControlMode::Full, 1e-4);
        let a = solve_forward_controlled(&theta, &xi, &cfg).unwrap();
        let b = solve_forward(&theta, &cfg).unwrap();
        assert!(a.final_u1().integral() < b.final_u1().integral());
    }

    #[test]
    fn projection_respects_mode_and_caps() {
        let (cfg, theta) = setup();
        let xi = ControlSet::uniform(&theta, -3.0, 42.0, ControlMode::Full, 1e-4);
        let p = xi.projected(&cfg.control);
        assert_eq!(p.xi1.min(), 0.0);
        assert_eq!(p.xi2.max(), 10.0);
        let q = ControlSet { mode: ControlMode::PhOnly, ..ControlSet::uniform(&theta, 5.0, -1.0, ControlMode::Full, 0.0) }
            .projected(&cfg.control);
        assert_eq!((q.xi1.max(), q.xi2.min()), (0.0, -1.0));
    }

    #[test]
    fn neutral_target_already_reached() {
        let (cfg, theta) = setup();
        let target = solve_forward(&theta, &cfg).unwrap().final_u1().clone();
        let res = neutralize(&theta, &target, &cfg, ControlMode::Full).unwrap();
        assert_eq!(res.accepted_steps(), 0);
        assert_eq!(res.xi.norm(), 0.0);
    }

    #[test]
    fn ph_only_leaves_kill_rate_at_zero() {
        let (mut cfg, theta) = setup();
        cfg.max_iters = 3;
        let target = ScalarField::constant(cfg.grid, 0.2);
        let res = neutralize(&theta, &target, &cfg, ControlMode::PhOnly).unwrap();
        assert_eq!(res.xi.xi1.max(), 0.0);
        assert_eq!(res.xi.xi1.min(), 0.0);
        let costs: Vec<f64> = res.history.iter().map(|r| r.cost.total).collect();
        assert!(costs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn combination_examples() {
        let (cfg, theta) = setup();
        let wide = Bounds([Interval::new(-100.0, 100.0); 6]);
        let k = ParamSet::uniform(cfg.grid, cfg.time, [2.0; 6], wide);
        let l = ParamSet::uniform(cfg.grid, cfg.time, [4.0; 6], wide);
        let m = mean_params(&k, &l).unwrap();
        assert!(m.fields().iter().all(|s| s.min() == 3.0 && s.max() == 3.0));
        assert_eq!(mean_params(&theta, &theta).unwrap(), theta);
        assert_eq!(mean_params(&k, &l).unwrap(), mean_params(&l, &k).unwrap());
        assert_eq!(combine_params(std::slice::from_ref(&theta), &[1.0]).unwrap(), theta);
        assert!(combine_params(&[k.clone(), l], &[1.0]).is_err());

        let other = ParamSet::uniform(cfg.grid, cfg.time, [0.009, -0.004, 0.001, 5.0, 0.1, 9.0], Bounds::default());
        let parts: Vec<&FieldSeries> = vec![theta.get(Component::Mu), other.get(Component::Mu)];
        let raw = weighted(&parts, &[0.3, 0.7]).unwrap();
        let b = Bounds::default().get(Component::Mu);
        assert!(raw.slices().iter().all(|s| s.values().iter().all(|&v| b.contains(v))));
    }

    #[test]
    fn control_combination_keeps_sign() {
        let (cfg, theta) = setup();
        let a = ControlSet::uniform(&theta, 2.0, -1.0, ControlMode::Full, 1e-4);
        let b = ControlSet::uniform(&theta, 0.0, 3.0, ControlMode::Full, 1e-4);
        let c = combine_controls(&[a, b], &[0.5, 0.5], &cfg.control).unwrap();
        assert!(c.xi1.min() >= 0.0);
        assert_eq!((c.xi1.max(), c.xi2.max()), (1.0, 1.0));
        let z = ControlSet::zeros(&theta, ControlMode::Full, 1e-4);
        assert_eq!(combine_controls(&[z.clone(), z.clone()], &[0.5, 0.5], &cfg.control).unwrap().norm(), 0.0);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("ph-only".parse::<ControlMode>().unwrap(), ControlMode::PhOnly);
        assert_eq!(ControlMode::Full.to_string(), "full");
        assert!("half".parse::<ControlMode>().is_err());
    }
}
