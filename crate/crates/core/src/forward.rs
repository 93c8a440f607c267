//! Explicit time stepping of the tumour density / proton system.
//!
//! ```text
//! ∂t u₁ = ∇·(σ∇u₁ + γ_κ u₁∇κ + γ_δ δ u₁∇u₂) + μ f₁(u₁, u₂)
//! ∂t u₂ = γ_pH Δu₂ − α u₂ + β f₂(u₁, u₂)
//! ```
//!
//! with zero total flux through the boundary for both species. Step `n`
//! uses the coefficients stored at level `n`; the last level of a
//! [`ParamSet`] only enters through the regularization.

use crate::calculus::grad;
use crate::config::{RunConfig, ScalarFactors};
use crate::error::{Error, Result};
use crate::field::{FieldSeries, ScalarField};
use crate::grid::{Grid2D, TimeGrid};
use crate::params::{Component, ParamSet, ParamSlice};
use crate::scheme::{self, ControlSlice};

/// Fraction of the positivity-preserving step limit reported as `tau_max`.
pub const SAFETY: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub min_u1: f64,
    pub max_u1: f64,
    pub min_u2: f64,
    pub max_u2: f64,
}

impl StepDiagnostics {
    fn of(u1: &ScalarField, u2: &ScalarField) -> Self {
        Self {
            min_u1: u1.min(),
            max_u1: u1.max(),
            min_u2: u2.min(),
            max_u2: u2.max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub u1: FieldSeries,
    pub u2: FieldSeries,
    /// One entry per stored level.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl StateTrajectory {
    pub fn time(&self) -> &TimeGrid {
        self.u1.time()
    }

    pub fn grid(&self) -> &Grid2D {
        self.u1.grid()
    }

    pub fn final_u1(&self) -> &ScalarField {
        self.u1.last()
    }

    pub fn final_u2(&self) -> &ScalarField {
        self.u2.last()
    }

    pub fn min(&self) -> f64 {
        self.u1.min().min(self.u2.min())
    }

    pub fn max(&self) -> f64 {
        self.u1.max().max(self.u2.max())
    }
}

fn check_theta(theta: &ParamSet, cfg: &RunConfig) -> Result<()> {
    if !theta.grid().same_shape(&cfg.grid) {
        return Err(Error::Shape("parameter grid differs from run grid".into()));
    }
    if theta.time() != &cfg.time {
        return Err(Error::Shape(format!(
            "parameters have {} levels, run has {}",
            theta.time().levels(),
            cfg.time.levels()
        )));
    }
    Ok(())
}

/// One explicit step from level `n` to `n + 1` with coefficients `theta_n`.
pub fn step_state(
    u1: &ScalarField,
    u2: &ScalarField,
    theta_n: &ParamSlice<'_>,
    factors: &ScalarFactors,
    tau: f64,
) -> Result<(ScalarField, ScalarField)> {
    u1.check_grid(u2)?;
    let grid = *u1.grid();
    let mut n1 = ScalarField::zeros(grid);
    let mut n2 = ScalarField::zeros(grid);
    scheme::state_step(
        &grid,
        tau,
        factors,
        u1.values(),
        u2.values(),
        theta_n,
        None,
        n1.values_mut(),
        n2.values_mut(),
    );
    Ok((n1, n2))
}

pub(crate) fn integrate(
    theta: &ParamSet,
    control: Option<(&FieldSeries, &FieldSeries)>,
    cfg: &RunConfig,
) -> Result<StateTrajectory> {
    check_theta(theta, cfg)?;
    let grid = cfg.grid;
    let time = cfg.time;
    let mut u1 = Vec::with_capacity(time.levels());
    let mut u2 = Vec::with_capacity(time.levels());
    u1.push(cfg.u1_init_field()?);
    u2.push(cfg.u2_init_field()?);
    let mut diagnostics = vec![StepDiagnostics::of(&u1[0], &u2[0])];
    for n in 0..time.steps() {
        let mut n1 = ScalarField::zeros(grid);
        let mut n2 = ScalarField::zeros(grid);
        let xi: ControlSlice<'_> = control.map(|(a, b)| (a.slice(n).values(), b.slice(n).values()));
        scheme::state_step(
            &grid,
            time.tau(),
            &cfg.factors,
            u1[n].values(),
            u2[n].values(),
            &theta.slice(n),
            xi,
            n1.values_mut(),
            n2.values_mut(),
        );
        if !n1.is_finite() || !n2.is_finite() {
            return Err(Error::Instability {
                step: n + 1,
                which: "state",
            });
        }
        diagnostics.push(StepDiagnostics::of(&n1, &n2));
        u1.push(n1);
        u2.push(n2);
    }
    Ok(StateTrajectory {
        u1: FieldSeries::from_slices(time, u1)?,
        u2: FieldSeries::from_slices(time, u2)?,
        diagnostics,
    })
}

/// Runs the state system from the configured initial data to `T`.
pub fn solve_forward(theta: &ParamSet, cfg: &RunConfig) -> Result<StateTrajectory> {
    integrate(theta, None, cfg)
}

/// Step-size limits of the explicit scheme, each the reciprocal of a rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    /// `1 / (2·D·(1/hx² + 1/hy²))` with `D = max(σ_max, γ_pH)`.
    pub parabolic: f64,
    /// `h_min / v_max` for the drift speed `|γ_κ∇κ| + |γ_δ δ∇u₂|`.
    pub advective: f64,
    /// `1 / max(α_max, μ_max)`.
    pub reaction: f64,
    /// `SAFETY / (1/parabolic + 1/advective + 1/reaction)`.
    pub tau_max: f64,
}

impl StabilityReport {
    pub fn admits(&self, tau: f64) -> bool {
        tau <= self.tau_max
    }
}

/// Estimates the largest step for which the explicit update keeps every
/// diagonal coefficient non-negative. The drift estimate uses the initial
/// proton field for `∇u₂`.
pub fn stability_check(theta: &ParamSet, cfg: &RunConfig) -> Result<StabilityReport> {
    check_theta(theta, cfg)?;
    let grid = cfg.grid;
    let max_of = |c: Component| theta.get(c).max();
    let diffusion = max_of(Component::Sigma).max(cfg.factors.gamma_ph).max(0.0);
    let inv_h2 = 1.0 / (grid.hx() * grid.hx()) + 1.0 / (grid.hy() * grid.hy());
    let parabolic = rate_limit(2.0 * diffusion * inv_h2);

    let u2_grad = grad(&cfg.u2_init_field()?);
    let u2_speed = u2_grad
        .x
        .zip_map(&u2_grad.y, |a, b| a.hypot(b))?;
    let mut speed: f64 = 0.0;
    let kappa = theta.get(Component::Kappa);
    let delta = theta.get(Component::Delta);
    for n in 0..theta.time().levels() {
        let gk = grad(kappa.slice(n));
        let d = delta.slice(n);
        for k in 0..grid.len() {
            let drift = cfg.factors.gamma_kappa * gk.x.values()[k].hypot(gk.y.values()[k])
                + cfg.factors.gamma_delta * d.values()[k].abs() * u2_speed.values()[k];
            speed = speed.max(drift);
        }
    }
    let advective = grid.hx().min(grid.hy()) / speed;
    let advective = if advective.is_finite() { advective } else { f64::INFINITY };
    let reaction = rate_limit(max_of(Component::Alpha).max(max_of(Component::Mu)).max(0.0));

    let total_rate = 1.0 / parabolic + 1.0 / advective + 1.0 / reaction;
    Ok(StabilityReport {
        parabolic,
        advective,
        reaction,
        tau_max: SAFETY / total_rate,
    })
}

fn rate_limit(rate: f64) -> f64 {
    if rate > 0.0 {
        1.0 / rate
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::InitialValue;
    use crate::params::Bounds;

    fn cfg(n: usize, final_time: f64, steps: usize) -> RunConfig {
        RunConfig::reference(Grid2D::square(n, n, 0.1).unwrap())
            .with_time(final_time, steps)
            .unwrap()
    }

    fn theta(c: &RunConfig, v: [f64; 6]) -> ParamSet {
        ParamSet::uniform(c.grid, c.time, v, Bounds::default())
    }

    #[test]
    fn homogeneous_u1_without_reaction_is_stationary() {
        let c = cfg(6, 1.0, 10);
        let traj = solve_forward(&theta(&c, [0.01, 0.0, 0.0, 1.0, 0.0, 0.0]), &c).unwrap();
        for s in traj.u1.slices() {
            assert!(s.values().iter().all(|&v| v == 0.2));
        }
    }

    #[test]
    fn proton_decay_recurrence() {
        let c = cfg(5, 1.0, 10);
        let traj = solve_forward(&theta(&c, [0.01, 0.0, 0.0, 1.0, 0.0, 0.0]), &c).unwrap();
        assert!((traj.u2.slice(1).at(2, 2) - 0.45).abs() < 1e-15);
        for (n, s) in traj.u2.slices().iter().enumerate() {
            let expected = 0.5 * 0.9f64.powi(n as i32);
            assert!((s.at(3, 1) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_steps_return_initial_state() {
        let c = cfg(4, 0.0, 0);
        let traj = solve_forward(&theta(&c, [0.01, 0.0, 0.0, 1.0, 1.0, 1.0]), &c).unwrap();
        assert_eq!(traj.u1.len(), 1);
        assert_eq!(traj.final_u1(), &ScalarField::constant(c.grid, 0.2));
    }

    #[test]
    fn instability_names_the_step() {
        let mut c = cfg(5, 1000.0, 100);
        c.u1_init = InitialValue::Field(ScalarField::from_fn(c.grid, |x, y| (x * 7.0 + y).sin().abs()));
        let err = solve_forward(&theta(&c, [1e6, 0.0, 0.0, 1.0, 1.0, 1.0]), &c).unwrap_err();
        match err {
            Error::Instability { step, .. } => assert!((2..=100).contains(&step)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let c = cfg(5, 1.0, 10);
        let other = cfg(5, 1.0, 5);
        assert!(solve_forward(&theta(&other, [0.01; 6]), &c).is_err());
    }

    #[test]
    fn stability_limits() {
        let c = cfg(6, 10.0, 100);
        let r = stability_check(&theta(&c, [0.01, 0.0, 0.0, 0.0, 0.0, 0.0]), &c).unwrap();
        // h²/(4σ) = 0.01 / 0.04
        assert!((r.parabolic - 0.25).abs() < 1e-14);
        assert_eq!(r.advective, f64::INFINITY);
        assert_eq!(r.reaction, f64::INFINITY);
        assert!((r.tau_max - SAFETY * 0.25).abs() < 1e-14);
        assert!(r.admits(c.time.tau()));

        let mut c2 = c.clone();
        c2.factors.gamma_ph = 1e-3;
        let a = stability_check(&theta(&c2, [0.01, 0.0, 0.0, 0.0, 0.0, 0.0]), &c2).unwrap();
        let b = stability_check(&theta(&c2, [0.005, 0.0, 0.0, 0.0, 0.0, 0.0]), &c2).unwrap();
        assert!((b.parabolic / a.parabolic - 2.0).abs() < 1e-12);
        assert!((b.tau_max / a.tau_max - 2.0).abs() < 1e-12);

        let with_drift = ParamSet::uniform(c.grid, c.time, [0.01, 0.0, 0.0, 1.0, 0.0, 2.0], Bounds::default());
        let mut with_drift = with_drift;
        *with_drift.get_mut(Component::Kappa) =
            FieldSeries::from_fn(c.grid, c.time, |_, x, _| 0.01 * x);
        let r = stability_check(&with_drift, &c).unwrap();
        assert!((r.advective - 0.1 / (0.01 * 0.01)).abs() / r.advective < 1e-9);
        assert!((r.reaction - 0.5).abs() < 1e-14);
        assert!(r.tau_max < SAFETY * r.parabolic.min(r.reaction));
    }
}
