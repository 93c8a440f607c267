//! Terminal-value parameter estimation: cost, gradient, box projection and
//! the projected gradient loop.
//!
//! The reduced cost is
//!
//! ```text
//! Ĵ(θ) = ½‖u₁(T) − O‖² + Σᵢ (λᵢ/2)‖θᵢ‖²
//! ```
//!
//! with `‖·‖` the lumped-mass L² norm in space and the trapezoidal rule in
//! time. Gradients are Riesz representers in that same inner product, so
//! `⟨∇Ĵ, η⟩` is the directional derivative of the discrete cost.

use serde::Serialize;

use crate::adjoint::{solve_adjoint, AdjointTrajectory};
use crate::calculus::{div, grad};
use crate::config::{RunConfig, ScalarFactors};
use crate::descent::{self, DescentProblem, DescentSettings, IterationRecord, StopReason};
use crate::error::{Error, Result};
use crate::field::{FieldSeries, ScalarField};
use crate::forward::{solve_forward, StateTrajectory};
use crate::kinetics;
use crate::params::{Component, ParamSet};
use crate::scheme;

pub use crate::descent::{eval_metrics, CostReport, MetricsReport};

/// Relative threshold for the `e_domain` metric recorded in histories.
pub const METRIC_EPS: f64 = 0.05;

/// Default stopping tolerance relative to `‖O‖²`.
pub const EPSILON_SCALE: f64 = 1e-4;

/// `∇Ĵ` with one series per coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    components: [FieldSeries; 6],
}

impl GradientSet {
    pub fn get(&self, c: Component) -> &FieldSeries {
        &self.components[c.index()]
    }

    pub fn components(&self) -> &[FieldSeries; 6] {
        &self.components
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(FieldSeries::is_finite)
    }

    /// Directional derivative `⟨∇Ĵ, η⟩` along `direction`.
    pub fn dot(&self, direction: &ParamSet) -> Result<f64> {
        let mut acc = 0.0;
        for c in Component::ALL {
            acc += self.get(c).inner(direction.get(c))?;
        }
        Ok(acc)
    }

    /// Gradient as an (unprojected) parameter set, for step arithmetic.
    pub fn as_params(&self, like: &ParamSet) -> ParamSet {
        ParamSet::new(self.components.clone(), *like.bounds()).expect("gradient matches parameter shape")
    }
}

/// `Σᵢ (λᵢ/2)‖θᵢ‖²` with trapezoidal time weights.
pub fn regularization(theta: &ParamSet, lambda: &[f64; 6]) -> f64 {
    Component::ALL
        .iter()
        .map(|&c| 0.5 * lambda[c.index()] * theta.get(c).norm_sq())
        .sum()
}

pub fn eval_cost(
    traj: &StateTrajectory,
    theta: &ParamSet,
    target: &ScalarField,
    lambda: &[f64; 6],
) -> Result<CostReport> {
    if theta.time() != traj.time() {
        return Err(Error::Shape("parameter and state time grids differ".into()));
    }
    let misfit = traj.final_u1().sub(target)?;
    Ok(CostReport::new(
        0.5 * misfit.norm_l2().powi(2),
        regularization(theta, lambda),
    ))
}

/// Scales the accumulated per-level sensitivities into gradient fields:
/// `g_n = (τ / w_n)·s_n + λ·x_n`, where `s_n` pairs `u_n` with `p_{n+1}` and
/// the terminal level carries only the Tikhonov part.
pub(crate) fn assemble_levels<const K: usize>(
    traj: &StateTrajectory,
    adj: &AdjointTrajectory,
    values: [&FieldSeries; K],
    lambda: [f64; K],
    mut sensitivity: impl FnMut(usize, &[f64], &[f64], &[f64], &[f64], &mut [Vec<f64>; K]),
) -> Result<[FieldSeries; K]> {
    let time = *traj.time();
    if adj.time() != &time {
        return Err(Error::Shape("state and adjoint time grids differ".into()));
    }
    if !adj.grid().same_shape(traj.grid()) {
        return Err(Error::Shape("state and adjoint grids differ".into()));
    }
    let grid = *traj.grid();
    let len = grid.len();
    let mut buf: [Vec<f64>; K] = std::array::from_fn(|_| vec![0.0; len]);
    let mut out: [Vec<ScalarField>; K] = std::array::from_fn(|_| Vec::with_capacity(time.levels()));
    for n in 0..time.levels() {
        let scale = if n < time.steps() {
            sensitivity(
                n,
                traj.u1.slice(n).values(),
                traj.u2.slice(n).values(),
                adj.p1.slice(n + 1).values(),
                adj.p2.slice(n + 1).values(),
                &mut buf,
            );
            time.tau() / time.weight(n)
        } else {
            buf.iter_mut().for_each(|b| b.fill(0.0));
            0.0
        };
        for c in 0..K {
            let x = values[c].slice(n).values();
            let v = buf[c]
                .iter()
                .zip(x)
                .map(|(s, xv)| scale * s + lambda[c] * xv)
                .collect();
            out[c].push(ScalarField::from_values(grid, v)?);
        }
    }
    let mut series = out.into_iter().map(|slices| FieldSeries::from_slices(time, slices));
    let mut result: [Option<FieldSeries>; K] = std::array::from_fn(|_| None);
    for r in result.iter_mut() {
        *r = Some(series.next().expect("K series")?);
    }
    Ok(result.map(|r| r.expect("filled")))
}

/// `∇Ĵ(θ)` from a state trajectory and its adjoint.
///
/// Per level, with `p` taken one level ahead of `u`, the components realize
/// `∇u₁·∇p₁`, `γ_κ ∇·(u₁∇p₁)`, `γ_δ u₁∇u₂·∇p₁`, `−u₂p₂`, `f₂p₂`, `f₁p₁`
/// (face-averaged stencils, signs as the transpose dictates), each plus
/// `λᵢθᵢ`.
pub fn assemble_gradient(
    traj: &StateTrajectory,
    adj: &AdjointTrajectory,
    theta: &ParamSet,
    lambda: &[f64; 6],
    factors: &ScalarFactors,
) -> Result<GradientSet> {
    if theta.time() != traj.time() {
        return Err(Error::Shape("parameter and state time grids differ".into()));
    }
    let grid = *traj.grid();
    let values = Component::ALL.map(|c| theta.get(c));
    let components = assemble_levels(traj, adj, values, *lambda, |_, u1, u2, q1, q2, buf| {
        scheme::param_sensitivity(&grid, factors, u1, u2, q1, q2, buf)
    })?;
    Ok(GradientSet { components })
}

/// Gradient from the pointwise optimality conditions,
///
/// ```text
/// g_σ = −∇u₁·∇p₁    g_κ = γ_κ ∇·(u₁∇p₁)    g_δ = −γ_δ u₁∇u₂·∇p₁
/// g_α = −u₂p₂       g_β = f₂p₂             g_μ = f₁p₁
/// ```
///
/// evaluated with node-central differences, with the same time pairing and
/// weights as [`assemble_gradient`]. It differs from the exact gradient of
/// the discrete cost by an `O(h²)` spatial consistency error.
pub fn assemble_gradient_pointwise(
    traj: &StateTrajectory,
    adj: &AdjointTrajectory,
    theta: &ParamSet,
    lambda: &[f64; 6],
    factors: &ScalarFactors,
) -> Result<GradientSet> {
    if theta.time() != traj.time() {
        return Err(Error::Shape("parameter and state time grids differ".into()));
    }
    let grid = *traj.grid();
    let field = |v: &[f64]| ScalarField::from_values(grid, v.to_vec()).expect("level matches grid");
    let values = Component::ALL.map(|c| theta.get(c));
    let components = assemble_levels(traj, adj, values, *lambda, |_, u1, u2, q1, q2, out| {
        let gu1 = grad(&field(u1));
        let gu2 = grad(&field(u2));
        let gp1 = grad(&field(q1));
        let fx: Vec<f64> = u1.iter().zip(gp1.x.values()).map(|(a, b)| a * b).collect();
        let fy: Vec<f64> = u1.iter().zip(gp1.y.values()).map(|(a, b)| a * b).collect();
        let kappa = div(&field(&fx), &field(&fy)).expect("same grid");
        for k in 0..grid.len() {
            let (a, b) = (u1[k], u2[k]);
            let dot1 = gu1.x.values()[k] * gp1.x.values()[k] + gu1.y.values()[k] * gp1.y.values()[k];
            let dot2 = gu2.x.values()[k] * gp1.x.values()[k] + gu2.y.values()[k] * gp1.y.values()[k];
            out[0][k] = -dot1;
            out[1][k] = factors.gamma_kappa * kappa.values()[k];
            out[2][k] = -factors.gamma_delta * a * dot2;
            out[3][k] = -b * q2[k];
            out[4][k] = kinetics::eval_f2(a, b) * q2[k];
            out[5][k] = kinetics::eval_f1(a, b) * q1[k];
        }
    })?;
    Ok(GradientSet { components })
}

/// Pointwise-form ∇Ĵ(θ) (see [`assemble_gradient_pointwise`]).
pub fn reduced_gradient_pointwise(theta: &ParamSet, target: &ScalarField, cfg: &RunConfig) -> Result<GradientSet> {
    let traj = solve_forward(theta, cfg)?;
    let adj = solve_adjoint(&traj, theta, target, &cfg.factors)?;
    assemble_gradient_pointwise(&traj, &adj, theta, &cfg.lambda, &cfg.factors)
}

/// Componentwise clamp into the parameter boxes.
pub fn project_box(theta: &ParamSet) -> ParamSet {
    theta.projected()
}

/// Ĵ(θ) together with the state it was computed from.
pub fn reduced_cost(theta: &ParamSet, target: &ScalarField, cfg: &RunConfig) -> Result<(CostReport, StateTrajectory)> {
    let traj = solve_forward(theta, cfg)?;
    let cost = eval_cost(&traj, theta, target, &cfg.lambda)?;
    Ok((cost, traj))
}

/// ∇Ĵ(θ) via one forward and one adjoint solve.
pub fn reduced_gradient(theta: &ParamSet, target: &ScalarField, cfg: &RunConfig) -> Result<GradientSet> {
    let traj = solve_forward(theta, cfg)?;
    let adj = solve_adjoint(&traj, theta, target, &cfg.factors)?;
    assemble_gradient(&traj, &adj, theta, &cfg.lambda, &cfg.factors)
}

/// Stopping tolerance: configured, or `1e-4·‖O‖²`.
pub fn effective_epsilon(cfg: &RunConfig, target: &ScalarField) -> f64 {
    cfg.epsilon
        .unwrap_or_else(|| (EPSILON_SCALE * target.norm_l2().powi(2)).max(f64::MIN_POSITIVE))
}

/// Uniform θ from `cfg.theta_init` (not yet projected).
pub fn initial_theta(cfg: &RunConfig) -> ParamSet {
    ParamSet::uniform(cfg.grid, cfg.time, cfg.theta_init, cfg.bounds)
}

#[derive(Debug, Clone)]
pub struct PgdResult {
    pub theta: ParamSet,
    pub trajectory: StateTrajectory,
    pub history: Vec<IterationRecord>,
    pub stop: StopReason,
    /// `‖θ − P(θ − ∇Ĵ(θ))‖ / ‖θ‖` at the returned iterate.
    pub stationarity: f64,
}

impl PgdResult {
    pub fn accepted_steps(&self) -> usize {
        self.history.len() - 1
    }

    pub fn final_metrics(&self) -> &MetricsReport {
        &self.history.last().expect("history holds the start point").metrics
    }

    pub fn stalled(&self) -> bool {
        self.stop == StopReason::Stalled
    }
}

/// Summary row for manifests.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub stop: StopReason,
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub stationarity: f64,
}

impl PgdResult {
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

struct ParameterProblem<'a> {
    target: &'a ScalarField,
    cfg: &'a RunConfig,
}

impl DescentProblem for ParameterProblem<'_> {
    type Point = ParamSet;

    fn target(&self) -> &ScalarField {
        self.target
    }

    fn evaluate(&self, x: &ParamSet) -> Result<(CostReport, StateTrajectory)> {
        reduced_cost(x, self.target, self.cfg)
    }

    fn gradient(&self, x: &ParamSet, state: &StateTrajectory) -> Result<ParamSet> {
        let adj = solve_adjoint(state, x, self.target, &self.cfg.factors)?;
        Ok(assemble_gradient(state, &adj, x, &self.cfg.lambda, &self.cfg.factors)?.as_params(x))
    }

    fn step(&self, x: &ParamSet, g: &ParamSet, gamma: f64) -> Result<ParamSet> {
        Ok(x.offset(-gamma, g)?.projected())
    }

    fn project(&self, x: &ParamSet) -> ParamSet {
        x.projected()
    }

    fn relative_distance(&self, x: &ParamSet, y: &ParamSet) -> Result<f64> {
        let diff = x.offset(-1.0, y)?;
        Ok(diff.norm() / x.norm().max(f64::MIN_POSITIVE))
    }
}

/// Projected gradient descent from `start` (projected before the first
/// solve).
pub fn pgd_from(start: &ParamSet, target: &ScalarField, cfg: &RunConfig) -> Result<PgdResult> {
    cfg.validate()?;
    if !target.grid().same_shape(&cfg.grid) {
        return Err(Error::Shape("target grid differs from run grid".into()));
    }
    if !target.is_finite() {
        return Err(Error::Config("target contains non-finite values".into()));
    }
    let start = start.clone().with_bounds(cfg.bounds);
    let problem = ParameterProblem { target, cfg };
    let settings = DescentSettings {
        max_iters: cfg.max_iters,
        epsilon: effective_epsilon(cfg, target),
        metric_eps: METRIC_EPS,
    };
    let out = descent::run(&problem, &start, &settings)?;
    Ok(PgdResult {
        theta: out.point,
        trajectory: out.trajectory,
        history: out.history,
        stop: out.stop,
        stationarity: out.stationarity,
    })
}

/// Projected gradient descent from the configured initial θ.
pub fn pgd_run(target: &ScalarField, cfg: &RunConfig) -> Result<PgdResult> {
    pgd_from(&initial_theta(cfg), target, cfg)
}
