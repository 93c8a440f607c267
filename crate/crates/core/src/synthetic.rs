//! Seeded fixtures: a ring-shaped tissue raster, a known parameter set, and
//! noisy copies of fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::field::{FieldSeries, ScalarField};
use crate::grid::{Grid2D, TimeGrid};
use crate::imaging::RasterImage;
use crate::params::{Bounds, Component, ParamSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `size × size` RGB image of a dark cell garland around a paler necrotic
/// core on a light background, with seeded speckle and salt-and-pepper
/// pixels.
pub fn ring_image(size: usize, seed: u64) -> RasterImage {
    let mut rng = rng(seed);
    let c = (size as f64 - 1.0) / 2.0;
    let radius = 0.32 * size as f64;
    let width = 0.09 * size as f64;
    let mut data = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let r = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
            let ring = (-((r - radius) / width).powi(2)).exp();
            let core = if r < radius - width { 0.35 } else { 0.0 };
            let dark = ring.max(core);
            let base = [235.0, 215.0, 230.0];
            let stain = [70.0, 35.0, 110.0];
            let noise: f64 = rng.random_range(-12.0..12.0);
            let speck: f64 = rng.random();
            for ch in 0..3 {
                let v = base[ch] + dark * (stain[ch] - base[ch]) + noise;
                let v = if speck < 0.01 {
                    0.0
                } else if speck > 0.99 {
                    255.0
                } else {
                    v
                };
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::rgb(size, size, data).expect("consistent raster size")
}

/// Smooth bump on the unit-scaled domain, peaking on a ring of the given
/// radius.
fn ring_profile(grid: &Grid2D, radius: f64, x: f64, y: f64) -> f64 {
    let (lx, ly) = grid.extent();
    let (sx, sy) = (x / lx - 0.5, y / ly - 0.5);
    let r = (sx * sx + sy * sy).sqrt();
    (-((r - radius) / 0.12).powi(2)).exp()
}

/// Time-constant, spatially varying θ* inside the default boxes.
pub fn reference_theta(grid: Grid2D, time: TimeGrid) -> ParamSet {
    ring_theta(grid, time, 0.28)
}

/// [`reference_theta`] with growth and acid production concentrated on a
/// ring of relative radius `radius`.
pub fn ring_theta(grid: Grid2D, time: TimeGrid, radius: f64) -> ParamSet {
    let (lx, ly) = grid.extent();
    let ring = |x: f64, y: f64| ring_profile(&grid, radius, x, y);
    let wave = move |x: f64, y: f64| (std::f64::consts::PI * x / lx).cos() * (std::f64::consts::PI * y / ly).cos();
    let make = |f: &dyn Fn(f64, f64) -> f64| FieldSeries::from_fn(grid, time, |_, x, y| f(x, y));
    let fields = [
        make(&|x, y| 0.002 + 0.003 * ring(x, y)),
        make(&|x, y| 0.005 * wave(x, y)),
        make(&|x, y| 0.002 + 0.004 * ring(x, y)),
        make(&|_, _| 1.0),
        make(&|x, y| 0.5 + 1.0 * ring(x, y)),
        make(&|x, y| 0.05 + 1.0 * ring(x, y)),
    ];
    let theta = ParamSet::new(fields, Bounds::default()).expect("matching shapes");
    debug_assert!(theta.in_box());
    theta
}

/// Uniform θ drawn from the boxes (one value per component).
pub fn random_uniform_theta(grid: Grid2D, time: TimeGrid, bounds: Bounds, rng: &mut impl Rng) -> ParamSet {
    let values = Component::ALL.map(|c| {
        let b = bounds.get(c);
        rng.random_range(b.lower..=b.upper)
    });
    ParamSet::uniform(grid, time, values, bounds)
}

/// Random in-box θ varying smoothly in space and time.
pub fn random_smooth_theta(grid: Grid2D, time: TimeGrid, bounds: Bounds, rng: &mut impl Rng) -> ParamSet {
    let fields = Component::ALL.map(|c| {
        let b = bounds.get(c);
        let centre = rng.random_range(0.25..0.75);
        let amp = rng.random_range(0.0..0.25);
        let (kx, ky, kt) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0), rng.random_range(0.0..1.0));
        let (lx, ly) = grid.extent();
        let tf = time.final_time().max(1.0);
        FieldSeries::from_fn(grid, time, move |t, x, y| {
            let s = (kx * std::f64::consts::PI * x / lx).sin()
                * (ky * std::f64::consts::PI * y / ly).cos()
                * (1.0 + kt * t / tf)
                / 2.0;
            b.lower + b.width() * (centre + amp * s)
        })
    });
    ParamSet::new(fields, bounds).expect("matching shapes")
}

/// Smooth random direction with unit-scale components, one series per
/// coefficient, each scaled by its box width.
pub fn random_direction(grid: Grid2D, time: TimeGrid, bounds: Bounds, rng: &mut impl Rng) -> ParamSet {
    let fields = Component::ALL.map(|c| {
        let w = bounds.get(c).width();
        let (a, b, p, q) = (
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.5..2.5),
            rng.random_range(0.5..2.5),
        );
        let (lx, ly) = grid.extent();
        let tf = time.final_time().max(1.0);
        FieldSeries::from_fn(grid, time, move |t, x, y| {
            w * (a * (p * std::f64::consts::PI * x / lx).cos() + b * (q * std::f64::consts::PI * y / ly).sin())
                * (1.0 - 0.5 * t / tf)
        })
    });
    ParamSet::new(fields, bounds).expect("matching shapes")
}

/// Field plus i.i.d. normal noise of standard deviation `sd`, clamped to
/// `[0, 1]`.
pub fn noisy(field: &ScalarField, sd: f64, seed: u64) -> ScalarField {
    let mut rng = rng(seed);
    let normal = Normal::new(0.0, sd).expect("finite sd");
    let values = field
        .values()
        .iter()
        .map(|v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0))
        .collect();
    ScalarField::from_values(*field.grid(), values).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic() {
        assert_eq!(ring_image(32, 7), ring_image(32, 7));
        assert_ne!(ring_image(32, 7), ring_image(32, 8));
        let g = Grid2D::square(8, 8, 0.1).unwrap();
        let f = ScalarField::constant(g, 0.5);
        assert_eq!(noisy(&f, 0.1, 3), noisy(&f, 0.1, 3));
    }

    #[test]
    fn generated_parameters_are_admissible() {
        let g = Grid2D::square(16, 16, 0.1).unwrap();
        let t = TimeGrid::new(1.0, 5).unwrap();
        assert!(reference_theta(g, t).in_box());
        let mut r = rng(1);
        for _ in 0..20 {
            assert!(random_smooth_theta(g, t, Bounds::default(), &mut r).in_box());
            assert!(random_uniform_theta(g, t, Bounds::default(), &mut r).in_box());
        }
    }
}
