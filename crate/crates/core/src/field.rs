//! Grid-sampled scalar fields and time series of fields.

use crate::error::{Error, Result};
use crate::grid::{Grid2D, TimeGrid};

/// Real values on the nodes of a [`Grid2D`], stored row-major (`j * nx + i`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx(),
                grid.ny()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x1, x2)` at every node.
    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.coords(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub(crate) fn check_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.same_shape(&other.grid) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "grid {:?} does not match {:?}",
                self.grid, other.grid
            )))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        self.map(|v| s * v)
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &ScalarField) -> Result<()> {
        self.check_grid(x)?;
        for (y, &xv) in self.values.iter_mut().zip(&x.values) {
            *y += a * xv;
        }
        Ok(())
    }

    /// Quadrature `Σ f · hx · hy`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_measure()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn norm_l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_measure()).sqrt()
    }

    pub fn norm_linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_measure())
    }

    /// Values clamped into `[lo, hi]`.
    pub fn clamped(&self, lo: f64, hi: f64) -> ScalarField {
        self.map(|v| v.clamp(lo, hi))
    }
}

/// L2 norm of a field.
pub fn norm_l2(f: &ScalarField) -> f64 {
    f.norm_l2()
}

/// Max-norm of a field.
pub fn norm_linf(f: &ScalarField) -> f64 {
    f.norm_linf()
}

/// Lumped-mass inner product `Σ f·g·hx·hy`.
pub fn inner(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    f.inner(g)
}

/// One field per time level, `time.levels()` slices on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    time: TimeGrid,
    slices: Vec<ScalarField>,
}

impl FieldSeries {
    pub fn constant(grid: Grid2D, time: TimeGrid, value: f64) -> Self {
        Self {
            time,
            slices: vec![ScalarField::constant(grid, value); time.levels()],
        }
    }

    pub fn from_slices(time: TimeGrid, slices: Vec<ScalarField>) -> Result<Self> {
        if slices.len() != time.levels() {
            return Err(Error::Shape(format!(
                "{} slices for {} time levels",
                slices.len(),
                time.levels()
            )));
        }
        if let Some(first) = slices.first() {
            for s in &slices[1..] {
                first.check_grid(s)?;
            }
        }
        Ok(Self { time, slices })
    }

    /// Same field repeated at every time level.
    pub fn repeat(time: TimeGrid, field: &ScalarField) -> Self {
        Self {
            time,
            slices: vec![field.clone(); time.levels()],
        }
    }

    /// Samples `f(t, x1, x2)` on every level and node.
    pub fn from_fn(grid: Grid2D, time: TimeGrid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let slices = (0..time.levels())
            .map(|n| {
                let t = time.time(n);
                ScalarField::from_fn(grid, |x, y| f(t, x, y))
            })
            .collect();
        Self { time, slices }
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn grid(&self) -> &Grid2D {
        self.slices[0].grid()
    }

    pub fn slices(&self) -> &[ScalarField] {
        &self.slices
    }

    pub fn slice(&self, n: usize) -> &ScalarField {
        &self.slices[n]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut ScalarField {
        &mut self.slices[n]
    }

    pub fn last(&self) -> &ScalarField {
        self.slices.last().expect("series has at least one level")
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub(crate) fn check_shape(&self, other: &FieldSeries) -> Result<()> {
        if self.len() != other.len() || self.time != other.time {
            return Err(Error::Shape(format!(
                "series with {} levels does not match {} levels",
                self.len(),
                other.len()
            )));
        }
        self.slices[0].check_grid(&other.slices[0])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> FieldSeries {
        Self {
            time: self.time,
            slices: self.slices.iter().map(|s| s.map(f)).collect(),
        }
    }

    pub fn zip_map(&self, other: &FieldSeries, f: impl Fn(f64, f64) -> f64 + Copy) -> Result<FieldSeries> {
        self.check_shape(other)?;
        let slices = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| a.zip_map(b, f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            time: self.time,
            slices,
        })
    }

    /// Space-time inner product with trapezoidal weights in time.
    pub fn inner(&self, other: &FieldSeries) -> Result<f64> {
        self.check_shape(other)?;
        let mut acc = 0.0;
        for (n, (a, b)) in self.slices.iter().zip(&other.slices).enumerate() {
            acc += self.time.weight(n) * a.inner(b)?;
        }
        Ok(acc)
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self).expect("series matches itself")
    }

    pub fn is_finite(&self) -> bool {
        self.slices.iter().all(ScalarField::is_finite)
    }

    pub fn min(&self) -> f64 {
        self.slices.iter().map(ScalarField::min).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.slices
            .iter()
            .map(ScalarField::max)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn into_slices(self) -> Vec<ScalarField> {
        self.slices
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid() -> Grid2D {
        // 10x10 nodes at h = 0.1 cover the unit square
        Grid2D::square(10, 10, 0.1).unwrap()
    }

    #[test]
    fn norms_of_zero_and_constants() {
        let g = unit_grid();
        let z = ScalarField::zeros(g);
        assert_eq!(z.norm_l2(), 0.0);
        assert_eq!(z.norm_linf(), 0.0);
        assert_eq!(z.inner(&z).unwrap(), 0.0);

        let one = ScalarField::constant(g, 1.0);
        assert!((one.norm_l2() - 1.0).abs() < 1e-14);

        let two = ScalarField::constant(g, 2.0);
        assert!((two.norm_l2() - 2.0).abs() < 1e-14);
        assert_eq!(two.norm_linf(), 2.0);
    }

    #[test]
    fn linf_zero_iff_field_zero() {
        let g = unit_grid();
        let mut f = ScalarField::zeros(g);
        assert_eq!(f.norm_linf(), 0.0);
        f.values_mut()[37] = -1e-300;
        assert!(f.norm_linf() > 0.0);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = ScalarField::zeros(unit_grid());
        let b = ScalarField::zeros(Grid2D::square(10, 11, 0.1).unwrap());
        assert!(matches!(a.inner(&b), Err(Error::Shape(_))));
        assert!(ScalarField::from_values(unit_grid(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn series_inner_uses_trapezoid_weights() {
        let g = unit_grid();
        let t = TimeGrid::new(2.0, 4).unwrap();
        let s = FieldSeries::constant(g, t, 3.0);
        // ∫_0^2 ∫ 9 dx dt = 18
        assert!((s.norm_sq() - 18.0).abs() < 1e-12);
    }
}
