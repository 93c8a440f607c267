//! Uniform space and time discretizations.
//!
//! Nodes are cell centres of an `nx × ny` raster; node `(i, j)` sits at
//! `((i + ½)·hx, (j + ½)·hy)` and owns a cell of measure `hx·hy`. The
//! domain boundary runs along the outer cell faces, so mirrored ghost cells
//! make every boundary face carry zero normal flux.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::Grid(format!(
                "need at least 3 nodes per axis, got {nx}x{ny}"
            )));
        }
        if !(hx > 0.0 && hx.is_finite() && hy > 0.0 && hy.is_finite()) {
            return Err(Error::Grid(format!(
                "spacings must be positive and finite, got hx={hx}, hy={hy}"
            )));
        }
        Ok(Self { nx, ny, hx, hy })
    }

    /// Square-cell grid with spacing `h` in both directions.
    pub fn square(nx: usize, ny: usize, h: f64) -> Result<Self> {
        Self::new(nx, ny, h, h)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of every node.
    pub fn cell_measure(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn area(&self) -> f64 {
        self.cell_measure() * self.len() as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Physical coordinates of node `(i, j)`.
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.hx, self.ny as f64 * self.hy)
    }

    pub fn same_shape(&self, other: &Grid2D) -> bool {
        self == other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    final_time: f64,
    steps: usize,
    tau: f64,
}

impl TimeGrid {
    /// `steps` may be zero, in which case `final_time` must be zero too and
    /// `tau` is reported as zero.
    pub fn new(final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time.is_finite() && final_time >= 0.0) {
            return Err(Error::Config(format!(
                "final time must be finite and non-negative, got {final_time}"
            )));
        }
        if steps == 0 {
            if final_time != 0.0 {
                return Err(Error::Config(
                    "zero time steps require final time 0".to_string(),
                ));
            }
            return Ok(Self {
                final_time,
                steps,
                tau: 0.0,
            });
        }
        if final_time == 0.0 {
            return Err(Error::Config(
                "positive step count requires a positive final time".to_string(),
            ));
        }
        Ok(Self {
            final_time,
            steps,
            tau: final_time / steps as f64,
        })
    }

    /// Grid with `steps` steps of width `tau`.
    pub fn from_step(tau: f64, steps: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {tau}")));
        }
        Self::new(tau * steps as f64, steps)
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Number of stored time levels, `steps + 1`.
    pub fn levels(&self) -> usize {
        self.steps + 1
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    /// Trapezoidal quadrature weight of level `n` in `[0, T]`.
    pub fn weight(&self, n: usize) -> f64 {
        if self.steps == 0 {
            return 0.0;
        }
        if n == 0 || n == self.steps {
            0.5 * self.tau
        } else {
            self.tau
        }
    }

    /// Same interval, `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.final_time, self.steps * factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid2D::new(2, 5, 0.1, 0.1).is_err());
        assert!(Grid2D::new(5, 5, 0.0, 0.1).is_err());
        assert!(Grid2D::new(5, 5, 0.1, f64::NAN).is_err());
        assert!(Grid2D::new(3, 3, 0.1, 0.2).is_ok());
    }

    #[test]
    fn tau_times_steps_recovers_final_time() {
        let t = TimeGrid::new(10.0, 100).unwrap();
        assert!((t.tau() - 0.1).abs() < 1e-15);
        assert!((t.tau() * t.steps() as f64 - t.final_time()).abs() <= f64::EPSILON * 10.0);
        let weights: f64 = (0..t.levels()).map(|n| t.weight(n)).sum();
        assert!((weights - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_steps() {
        let t = TimeGrid::new(0.0, 0).unwrap();
        assert_eq!(t.levels(), 1);
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(0.0, 3).is_err());
    }
}
