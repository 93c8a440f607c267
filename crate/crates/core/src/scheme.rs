//! Stencil kernels shared by the state step, its transpose, and the gradient.
//!
//! The cell flux across the face between nodes `l` and `r = l + e` (with
//! `e` the unit offset along x or y and `s = 1/h` the spacing inverse) is
//!
//! ```text
//! F = s·[ σ̄·(u₁ᵣ − u₁ₗ) + γ_κ·ū₁·(κᵣ − κₗ) + γ_δ·δ̄·ū₁·(u₂ᵣ − u₂ₗ) ]
//! Q = s·γ_pH·(u₂ᵣ − u₂ₗ)
//! ```
//!
//! where bars are two-point face averages. Node `l` gains `s·F` and node
//! `r` loses it, so interior fluxes telescope and boundary faces (which are
//! never visited) carry nothing.

use crate::config::ScalarFactors;
use crate::grid::Grid2D;
use crate::kinetics;
use crate::params::ParamSlice;

/// Control slices `(ξ₁, ξ₂)` at one time level.
pub(crate) type ControlSlice<'a> = Option<(&'a [f64], &'a [f64])>;

#[inline]
pub(crate) fn for_each_face(grid: &Grid2D, mut f: impl FnMut(usize, usize, f64)) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let sx = 1.0 / grid.hx();
    let sy = 1.0 / grid.hy();
    for j in 0..ny {
        let row = j * nx;
        for i in 0..nx - 1 {
            f(row + i, row + i + 1, sx);
        }
    }
    for j in 0..ny - 1 {
        let row = j * nx;
        for i in 0..nx {
            f(row + i, row + i + nx, sy);
        }
    }
}

/// Explicit step `u ← u + τ·Φ(u; θ, ξ)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn state_step(
    grid: &Grid2D,
    tau: f64,
    factors: &ScalarFactors,
    u1: &[f64],
    u2: &[f64],
    th: &ParamSlice<'_>,
    xi: ControlSlice<'_>,
    out1: &mut [f64],
    out2: &mut [f64],
) {
    for k in 0..u1.len() {
        let (a, b) = (u1[k], u2[k]);
        out1[k] = th.mu[k] * kinetics::eval_f1(a, b);
        out2[k] = -th.alpha[k] * b + th.beta[k] * kinetics::eval_f2(a, b);
    }
    if let Some((x1, x2)) = xi {
        for k in 0..u1.len() {
            out1[k] -= x1[k] * u1[k];
            out2[k] += x2[k] * u2[k];
        }
    }
    let ScalarFactors {
        gamma_kappa: gk,
        gamma_delta: gd,
        gamma_ph: gp,
    } = *factors;
    for_each_face(grid, |l, r, s| {
        let sig = 0.5 * (th.sigma[l] + th.sigma[r]);
        let del = 0.5 * (th.delta[l] + th.delta[r]);
        let m = 0.5 * (u1[l] + u1[r]);
        let d2 = u2[r] - u2[l];
        let flux = s * (sig * (u1[r] - u1[l]) + gk * m * (th.kappa[r] - th.kappa[l]) + gd * del * m * d2);
        out1[l] += s * flux;
        out1[r] -= s * flux;
        let q = s * s * gp * d2;
        out2[l] += q;
        out2[r] -= q;
    });
    for k in 0..u1.len() {
        out1[k] = u1[k] + tau * out1[k];
        out2[k] = u2[k] + tau * out2[k];
    }
}

/// Transposed step `p ← q + τ·(∂Φ/∂u)ᵀ q`, linearized at `(u₁, u₂)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn adjoint_step(
    grid: &Grid2D,
    tau: f64,
    factors: &ScalarFactors,
    u1: &[f64],
    u2: &[f64],
    th: &ParamSlice<'_>,
    xi: ControlSlice<'_>,
    q1: &[f64],
    q2: &[f64],
    out1: &mut [f64],
    out2: &mut [f64],
) {
    for k in 0..u1.len() {
        let ev = kinetics::eval(u1[k], u2[k]);
        let (mu, beta) = (th.mu[k], th.beta[k]);
        out1[k] = mu * ev.d1f1 * q1[k] + beta * ev.d1f2 * q2[k];
        out2[k] = mu * ev.d2f1 * q1[k] + beta * ev.d2f2 * q2[k] - th.alpha[k] * q2[k];
    }
    if let Some((x1, x2)) = xi {
        for k in 0..u1.len() {
            out1[k] -= x1[k] * q1[k];
            out2[k] += x2[k] * q2[k];
        }
    }
    let ScalarFactors {
        gamma_kappa: gk,
        gamma_delta: gd,
        gamma_ph: gp,
    } = *factors;
    for_each_face(grid, |l, r, s| {
        let w = s * s * (q1[l] - q1[r]);
        let sig = 0.5 * (th.sigma[l] + th.sigma[r]);
        let del = 0.5 * (th.delta[l] + th.delta[r]);
        let m = 0.5 * (u1[l] + u1[r]);
        let drift = 0.5 * (gk * (th.kappa[r] - th.kappa[l]) + gd * del * (u2[r] - u2[l]));
        out1[l] += w * (drift - sig);
        out1[r] += w * (drift + sig);
        let taxis = w * gd * del * m;
        out2[l] -= taxis;
        out2[r] += taxis;
        let wq = s * s * gp * (q2[l] - q2[r]);
        out2[l] -= wq;
        out2[r] += wq;
    });
    for k in 0..u1.len() {
        out1[k] = q1[k] + tau * out1[k];
        out2[k] = q2[k] + tau * out2[k];
    }
}

/// Accumulates `(∂Φ/∂θ)ᵀ q` for one level into the six outputs
/// (order σ, κ, δ, α, β, μ).
pub(crate) fn param_sensitivity(
    grid: &Grid2D,
    factors: &ScalarFactors,
    u1: &[f64],
    u2: &[f64],
    q1: &[f64],
    q2: &[f64],
    out: &mut [Vec<f64>; 6],
) {
    let [g_sigma, g_kappa, g_delta, g_alpha, g_beta, g_mu] = out;
    for k in 0..u1.len() {
        let (a, b) = (u1[k], u2[k]);
        g_alpha[k] = -b * q2[k];
        g_beta[k] = kinetics::eval_f2(a, b) * q2[k];
        g_mu[k] = kinetics::eval_f1(a, b) * q1[k];
        g_sigma[k] = 0.0;
        g_kappa[k] = 0.0;
        g_delta[k] = 0.0;
    }
    let gk = factors.gamma_kappa;
    let gd = factors.gamma_delta;
    for_each_face(grid, |l, r, s| {
        let w = s * s * (q1[l] - q1[r]);
        let m = 0.5 * (u1[l] + u1[r]);
        let ds = 0.5 * w * (u1[r] - u1[l]);
        g_sigma[l] += ds;
        g_sigma[r] += ds;
        let dk = w * gk * m;
        g_kappa[l] -= dk;
        g_kappa[r] += dk;
        let dd = 0.5 * w * gd * m * (u2[r] - u2[l]);
        g_delta[l] += dd;
        g_delta[r] += dd;
    });
}

/// `(∂Φ/∂ξ)ᵀ q` for the two control components.
pub(crate) fn control_sensitivity(u1: &[f64], u2: &[f64], q1: &[f64], q2: &[f64], out1: &mut [f64], out2: &mut [f64]) {
    for k in 0..u1.len() {
        out1[k] = -u1[k] * q1[k];
        out2[k] = u2[k] * q2[k];
    }
}
