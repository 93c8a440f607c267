//! Projected gradient descent with halving step sizes.
//!
//! Iterate: `x ← P(x − γ∇Ĵ(x))` with `γ ∈ {1, ½, ¼, …}`; the first `γ`
//! giving a strict decrease of `Ĵ` is accepted. The loop stops when
//! `Ĵ < ε`, when the iteration cap is hit, or when no `γ ≥ 2⁻³⁰` decreases
//! the cost.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::forward::StateTrajectory;

/// Smallest step size tried before declaring a stall.
pub const MIN_STEP: f64 = 1.0 / (1u64 << 30) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostReport {
    /// `½‖u₁(T) − O‖²`
    pub terminal_misfit: f64,
    /// Tikhonov term.
    pub regularization: f64,
    pub total: f64,
}

impl CostReport {
    pub fn new(terminal_misfit: f64, regularization: f64) -> Self {
        Self {
            terminal_misfit,
            regularization,
            total: terminal_misfit + regularization,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub e2: f64,
    pub e_inf: f64,
    /// `None` when the target has zero norm.
    pub e_rel: Option<f64>,
    /// Threshold used for `e_domain`.
    pub eps: f64,
    /// Fraction of the domain where the pointwise error exceeds `eps`.
    pub e_domain: f64,
}

/// Absolute, max, relative, and thresholded-volume errors of `u1_final`
/// against `target`.
pub fn eval_metrics(u1_final: &ScalarField, target: &ScalarField, eps: f64) -> Result<MetricsReport> {
    let err = u1_final.sub(target)?;
    let e2 = err.norm_l2();
    let target_norm = target.norm_l2();
    let above = err.values().iter().filter(|v| v.abs() > eps).count();
    Ok(MetricsReport {
        e2,
        e_inf: err.norm_linf(),
        e_rel: (target_norm > 0.0).then(|| e2 / target_norm),
        eps,
        e_domain: above as f64 / err.values().len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: CostReport,
    /// Step accepted to reach this iterate; `None` for the start point.
    pub gamma: Option<f64>,
    /// Line-search candidates evaluated for this iterate.
    pub trials: usize,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentSettings {
    pub max_iters: usize,
    pub epsilon: f64,
    /// Threshold for the `e_domain` metric.
    pub metric_eps: f64,
}

/// A cost functional over a convex set, as seen by the descent loop.
pub(crate) trait DescentProblem {
    type Point: Clone;

    fn target(&self) -> &ScalarField;

    fn evaluate(&self, x: &Self::Point) -> Result<(CostReport, StateTrajectory)>;

    fn gradient(&self, x: &Self::Point, state: &StateTrajectory) -> Result<Self::Point>;

    /// `P(x − γ g)`.
    fn step(&self, x: &Self::Point, g: &Self::Point, gamma: f64) -> Result<Self::Point>;

    fn project(&self, x: &Self::Point) -> Self::Point;

    /// `‖x − y‖ / max(‖x‖, tiny)`.
    fn relative_distance(&self, x: &Self::Point, y: &Self::Point) -> Result<f64>;
}

pub(crate) struct DescentOutcome<P> {
    pub point: P,
    pub trajectory: StateTrajectory,
    pub history: Vec<IterationRecord>,
    pub stop: StopReason,
    /// `‖x − P(x − ∇Ĵ(x))‖ / ‖x‖` at the returned point.
    pub stationarity: f64,
}

pub(crate) fn run<Pb: DescentProblem>(
    problem: &Pb,
    start: &Pb::Point,
    settings: &DescentSettings,
) -> Result<DescentOutcome<Pb::Point>> {
    let mut x = problem.project(start);
    let (mut cost, mut state) = problem.evaluate(&x)?;
    let record = |iteration, cost: CostReport, gamma, trials, state: &StateTrajectory| -> Result<IterationRecord> {
        Ok(IterationRecord {
            iteration,
            cost,
            gamma,
            trials,
            metrics: eval_metrics(state.final_u1(), problem.target(), settings.metric_eps)?,
        })
    };
    let mut history = vec![record(0, cost, None, 0, &state)?];
    let mut stop = StopReason::MaxIterations;
    let mut grad = None;

    for k in 1..=settings.max_iters {
        if cost.total < settings.epsilon {
            stop = StopReason::Converged;
            break;
        }
        let g = problem.gradient(&x, &state)?;
        let mut gamma = 1.0;
        let mut trials = 0;
        let mut accepted = None;
        while gamma >= MIN_STEP {
            trials += 1;
            let y = problem.step(&x, &g, gamma)?;
            match problem.evaluate(&y) {
                Ok((c, s)) if c.total < cost.total => {
                    accepted = Some((y, c, s));
                    break;
                }
                Ok(_) | Err(Error::Instability { .. }) => gamma *= 0.5,
                Err(e) => return Err(e),
            }
        }
        match accepted {
            Some((y, c, s)) => {
                x = y;
                cost = c;
                state = s;
                history.push(record(k, cost, Some(gamma), trials, &state)?);
            }
            None => {
                stop = StopReason::Stalled;
                grad = Some(g);
                break;
            }
        }
    }
    if stop == StopReason::MaxIterations && cost.total < settings.epsilon {
        stop = StopReason::Converged;
    }

    let g = match grad {
        Some(g) => g,
        None => problem.gradient(&x, &state)?,
    };
    let stationarity = problem.relative_distance(&x, &problem.step(&x, &g, 1.0)?)?;
    Ok(DescentOutcome {
        point: x,
        trajectory: state,
        history,
        stop,
        stationarity,
    })
}
