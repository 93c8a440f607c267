//! Backward adjoint solve for the terminal misfit `½‖u₁(T) − O‖²`.
//!
//! Each backward step is the exact transpose of the corresponding forward
//! step, linearized at the stored state `u_n`:
//!
//! ```text
//! p_n = p_{n+1} + τ·(∂Φ/∂u)(u_n; θ_n)ᵀ p_{n+1}
//! ```
//!
//! In the continuum limit this is
//!
//! ```text
//! −∂t p₁ = ∇·(σ∇p₁) − (γ_κ∇κ + γ_δ δ∇u₂)·∇p₁ + μ ∂₁f₁ p₁ + β ∂₁f₂ p₂
//! −∂t p₂ = γ_pH Δp₂ + γ_δ ∇·(δ u₁∇p₁) − α p₂ + μ ∂₂f₁ p₁ + β ∂₂f₂ p₂
//! ```
//!
//! with `∇p·n̂ = 0` on the boundary, `p₁(T) = u₁(T) − O` and `p₂(T) = 0`.

use crate::config::ScalarFactors;
use crate::error::{Error, Result};
use crate::field::{FieldSeries, ScalarField};
use crate::forward::StateTrajectory;
use crate::grid::{Grid2D, TimeGrid};
use crate::params::{ParamSet, ParamSlice};
use crate::scheme;

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    pub p1: FieldSeries,
    pub p2: FieldSeries,
}

impl AdjointTrajectory {
    pub fn time(&self) -> &TimeGrid {
        self.p1.time()
    }

    pub fn grid(&self) -> &Grid2D {
        self.p1.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.p1.is_finite() && self.p2.is_finite()
    }
}

/// One backward step from level `n + 1` to `n`, linearized at `(u1_n, u2_n)`.
#[allow(clippy::too_many_arguments)]
pub fn step_adjoint(
    p1_next: &ScalarField,
    p2_next: &ScalarField,
    u1_n: &ScalarField,
    u2_n: &ScalarField,
    theta_n: &ParamSlice<'_>,
    factors: &ScalarFactors,
    tau: f64,
) -> Result<(ScalarField, ScalarField)> {
    p1_next.check_grid(p2_next)?;
    p1_next.check_grid(u1_n)?;
    p1_next.check_grid(u2_n)?;
    let grid = *p1_next.grid();
    let mut p1 = ScalarField::zeros(grid);
    let mut p2 = ScalarField::zeros(grid);
    scheme::adjoint_step(
        &grid,
        tau,
        factors,
        u1_n.values(),
        u2_n.values(),
        theta_n,
        None,
        p1_next.values(),
        p2_next.values(),
        p1.values_mut(),
        p2.values_mut(),
    );
    Ok((p1, p2))
}

pub(crate) fn integrate_backward(
    traj: &StateTrajectory,
    theta: &ParamSet,
    control: Option<(&FieldSeries, &FieldSeries)>,
    target: &ScalarField,
    factors: &ScalarFactors,
) -> Result<AdjointTrajectory> {
    let time = *traj.time();
    if theta.time() != &time {
        return Err(Error::Shape("parameter and state time grids differ".into()));
    }
    if !theta.grid().same_shape(traj.grid()) {
        return Err(Error::Shape("parameter and state grids differ".into()));
    }
    let grid = *traj.grid();
    let terminal = traj.final_u1().sub(target)?;
    let levels = time.levels();
    let mut p1 = vec![ScalarField::zeros(grid); levels];
    let mut p2 = vec![ScalarField::zeros(grid); levels];
    p1[levels - 1] = terminal;
    for n in (0..time.steps()).rev() {
        let xi = control.map(|(a, b)| (a.slice(n).values(), b.slice(n).values()));
        let (lo, hi) = p1.split_at_mut(n + 1);
        let (lo2, hi2) = p2.split_at_mut(n + 1);
        scheme::adjoint_step(
            &grid,
            time.tau(),
            factors,
            traj.u1.slice(n).values(),
            traj.u2.slice(n).values(),
            &theta.slice(n),
            xi,
            hi[0].values(),
            hi2[0].values(),
            lo[n].values_mut(),
            lo2[n].values_mut(),
        );
        if !lo[n].is_finite() || !lo2[n].is_finite() {
            return Err(Error::Instability {
                step: n,
                which: "adjoint",
            });
        }
    }
    Ok(AdjointTrajectory {
        p1: FieldSeries::from_slices(time, p1)?,
        p2: FieldSeries::from_slices(time, p2)?,
    })
}

/// Solves backward from the terminal residual `u₁(T) − target`.
pub fn solve_adjoint(
    traj: &StateTrajectory,
    theta: &ParamSet,
    target: &ScalarField,
    factors: &ScalarFactors,
) -> Result<AdjointTrajectory> {
    integrate_backward(traj, theta, None, target, factors)
}
