//! Parameter estimation and pattern control for an acid-mediated glioma
//! reaction-diffusion-taxis model.
//!
//! The state `(u₁, u₂)` (tumour density, proton concentration) evolves on a
//! uniform cell-centred grid with zero-flux boundaries. Spatio-temporal
//! coefficients θ = (σ, κ, δ, α, β, μ) are fitted to a terminal density
//! image by projected gradient descent with adjoint gradients; neutralizing
//! controls ξ are fitted the same way with θ frozen.

pub mod adjoint;
pub mod archive;
pub mod calculus;
pub mod config;
pub mod control;
mod descent;
pub mod error;
pub mod field;
pub mod forward;
pub mod grid;
pub mod imaging;
pub mod kinetics;
pub mod optimizer;
pub mod params;
mod scheme;
pub mod synthetic;

pub use descent::{IterationRecord, StopReason, MIN_STEP};
pub use error::{Error, Result};
pub use field::{FieldSeries, ScalarField};
pub use grid::{Grid2D, TimeGrid};
pub use params::{Bounds, Component, Interval, ParamSet};
