//! The six space-time coefficient fields and their box constraints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldSeries, ScalarField};
use crate::grid::{Grid2D, TimeGrid};

/// Coefficient identity, in the order `(σ, κ, δ, α, β, μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Sigma,
    Kappa,
    Delta,
    Alpha,
    Beta,
    Mu,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::Sigma,
        Component::Kappa,
        Component::Delta,
        Component::Alpha,
        Component::Beta,
        Component::Mu,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Sigma => "sigma",
            Component::Kappa => "kappa",
            Component::Delta => "delta",
            Component::Alpha => "alpha",
            Component::Beta => "beta",
            Component::Mu => "mu",
        }
    }
}

/// Inclusive interval a coefficient is clamped into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    #[inline]
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Per-component boxes. Defaults:
/// σ ∈ [1e-4, 1e-2], κ ∈ [-1e-2, 1e-2], δ ∈ [1e-4, 1e-2],
/// α, β, μ ∈ [1e-4, 10].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds(pub [Interval; 6]);

impl Default for Bounds {
    fn default() -> Self {
        Bounds([
            Interval::new(1e-4, 1e-2),
            Interval::new(-1e-2, 1e-2),
            Interval::new(1e-4, 1e-2),
            Interval::new(1e-4, 10.0),
            Interval::new(1e-4, 10.0),
            Interval::new(1e-4, 10.0),
        ])
    }
}

impl Bounds {
    pub fn get(&self, c: Component) -> Interval {
        self.0[c.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for c in Component::ALL {
            let b = self.get(c);
            if !(b.lower.is_finite() && b.upper.is_finite() && b.lower <= b.upper) {
                return Err(Error::Config(format!(
                    "bad box for {}: [{}, {}]",
                    c.name(),
                    b.lower,
                    b.upper
                )));
            }
        }
        Ok(())
    }
}

/// θ = (σ, κ, δ, α, β, μ), one [`FieldSeries`] per coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    fields: [FieldSeries; 6],
    bounds: Bounds,
}

/// Borrowed view of all six coefficients at one time level.
#[derive(Clone, Copy)]
pub struct ParamSlice<'a> {
    pub sigma: &'a [f64],
    pub kappa: &'a [f64],
    pub delta: &'a [f64],
    pub alpha: &'a [f64],
    pub beta: &'a [f64],
    pub mu: &'a [f64],
}

impl ParamSet {
    pub fn new(fields: [FieldSeries; 6], bounds: Bounds) -> Result<Self> {
        for f in &fields[1..] {
            fields[0].check_shape(f)?;
        }
        bounds.validate()?;
        Ok(Self { fields, bounds })
    }

    /// Spatially and temporally constant coefficients (not projected).
    pub fn uniform(grid: Grid2D, time: TimeGrid, values: [f64; 6], bounds: Bounds) -> Self {
        Self {
            fields: values.map(|v| FieldSeries::constant(grid, time, v)),
            bounds,
        }
    }

    pub fn get(&self, c: Component) -> &FieldSeries {
        &self.fields[c.index()]
    }

    pub fn get_mut(&mut self, c: Component) -> &mut FieldSeries {
        &mut self.fields[c.index()]
    }

    pub fn set(&mut self, c: Component, series: FieldSeries) -> Result<()> {
        self.fields[0].check_shape(&series)?;
        self.fields[c.index()] = series;
        Ok(())
    }

    pub fn fields(&self) -> &[FieldSeries; 6] {
        &self.fields
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn grid(&self) -> &Grid2D {
        self.fields[0].grid()
    }

    pub fn time(&self) -> &TimeGrid {
        self.fields[0].time()
    }

    pub fn slice(&self, n: usize) -> ParamSlice<'_> {
        let s = |c: Component| self.fields[c.index()].slice(n).values();
        ParamSlice {
            sigma: s(Component::Sigma),
            kappa: s(Component::Kappa),
            delta: s(Component::Delta),
            alpha: s(Component::Alpha),
            beta: s(Component::Beta),
            mu: s(Component::Mu),
        }
    }

    /// Componentwise clamp into the box. Idempotent.
    pub fn projected(&self) -> ParamSet {
        let mut out = self.clone();
        out.project_in_place();
        out
    }

    pub fn project_in_place(&mut self) {
        for c in Component::ALL {
            let b = self.bounds.get(c);
            for n in 0..self.fields[c.index()].len() {
                for v in self.fields[c.index()].slice_mut(n).values_mut() {
                    *v = b.clamp(*v);
                }
            }
        }
    }

    pub fn in_box(&self) -> bool {
        Component::ALL.iter().all(|&c| {
            let b = self.bounds.get(c);
            self.get(c)
                .slices()
                .iter()
                .all(|s| s.values().iter().all(|&v| b.contains(v)))
        })
    }

    pub fn check_shape(&self, other: &ParamSet) -> Result<()> {
        self.fields[0].check_shape(&other.fields[0])
    }

    /// `Σ_i w_i ⟨self_i, other_i⟩` over the space-time grid.
    pub fn inner(&self, other: &ParamSet) -> Result<f64> {
        self.check_shape(other)?;
        let mut acc = 0.0;
        for c in Component::ALL {
            acc += self.get(c).inner(other.get(c))?;
        }
        Ok(acc)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).expect("same shape").sqrt()
    }

    /// `self + a·dir` without projection.
    pub fn offset(&self, a: f64, dir: &ParamSet) -> Result<ParamSet> {
        let mut out = self.clone();
        for c in Component::ALL {
            out.fields[c.index()] = self.get(c).zip_map(dir.get(c), move |x, d| x + a * d)?;
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.fields.iter().all(FieldSeries::is_finite)
    }

    /// Component fields at time level `n` as owned fields.
    pub fn level(&self, n: usize) -> [ScalarField; 6] {
        Component::ALL.map(|c| self.get(c).slice(n).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (Grid2D, TimeGrid) {
        (Grid2D::square(4, 3, 0.1).unwrap(), TimeGrid::new(1.0, 2).unwrap())
    }

    #[test]
    fn projection_clamps_to_default_boxes() {
        let (g, t) = small();
        let theta = ParamSet::uniform(g, t, [0.02, -0.5, 0.005, 0.0, 20.0, 1.0], Bounds::default());
        let p = theta.projected();
        assert_eq!(p.get(Component::Sigma).slice(0).at(0, 0), 0.01);
        assert_eq!(p.get(Component::Kappa).slice(1).at(1, 1), -0.01);
        assert_eq!(p.get(Component::Delta).slice(2).at(2, 2), 0.005);
        assert_eq!(p.get(Component::Alpha).slice(0).at(0, 0), 1e-4);
        assert_eq!(p.get(Component::Beta).slice(0).at(0, 0), 10.0);
        assert_eq!(p.get(Component::Mu).slice(0).at(0, 0), 1.0);
        assert!(p.in_box());
        assert!(!theta.in_box());
        assert_eq!(p.projected(), p);
    }

    #[test]
    fn rejects_inverted_bounds() {
        let mut b = Bounds::default();
        b.0[2] = Interval::new(1.0, 0.0);
        let (g, t) = small();
        let fields = [0.0; 6].map(|v| FieldSeries::constant(g, t, v));
        assert!(ParamSet::new(fields, b).is_err());
    }
}
