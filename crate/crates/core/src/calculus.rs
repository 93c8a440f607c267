//! Discrete differential operators with zero-flux boundaries.
//!
//! Ghost cells mirror the boundary cells across the outer face
//! (`f[-1] = f[0]`), so the face-normal derivative vanishes there.
//! [`grad`] is the node-centred central difference; [`div`] is its negative
//! lumped-mass adjoint, which makes `Σ div(v)·hx·hy = 0` for every `v` and
//! gives exact summation by parts. [`laplace_neumann`] is the compact
//! 5-point stencil used by the state and adjoint solvers.

use crate::error::Result;
use crate::field::ScalarField;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        x.check_grid(&y)?;
        Ok(Self { x, y })
    }
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

/// Applies a 1-D line operator along every grid line of `axis`.
fn along(f: &ScalarField, axis: Axis, op: impl Fn(&[f64], &mut [f64], f64)) -> ScalarField {
    let g = *f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let mut out = ScalarField::zeros(g);
    match axis {
        Axis::X => {
            for j in 0..ny {
                let row = &f.values()[j * nx..(j + 1) * nx];
                op(row, &mut out.values_mut()[j * nx..(j + 1) * nx], g.hx());
            }
        }
        Axis::Y => {
            let mut line = vec![0.0; ny];
            let mut res = vec![0.0; ny];
            for i in 0..nx {
                for (j, l) in line.iter_mut().enumerate() {
                    *l = f.values()[j * nx + i];
                }
                op(&line, &mut res, g.hy());
                for (j, r) in res.iter().enumerate() {
                    out.values_mut()[j * nx + i] = *r;
                }
            }
        }
    }
    out
}

fn central_line(f: &[f64], out: &mut [f64], h: f64) {
    let n = f.len();
    let s = 0.5 / h;
    out[0] = (f[1] - f[0]) * s;
    for k in 1..n - 1 {
        out[k] = (f[k + 1] - f[k - 1]) * s;
    }
    out[n - 1] = (f[n - 1] - f[n - 2]) * s;
}

fn div_line(v: &[f64], out: &mut [f64], h: f64) {
    let n = v.len();
    let s = 0.5 / h;
    out[0] = (v[1] + v[0]) * s;
    for k in 1..n - 1 {
        out[k] = (v[k + 1] - v[k - 1]) * s;
    }
    out[n - 1] = -(v[n - 1] + v[n - 2]) * s;
}

fn laplace_line(f: &[f64], out: &mut [f64], h: f64) {
    let n = f.len();
    let s = 1.0 / (h * h);
    out[0] = (f[1] - f[0]) * s;
    for k in 1..n - 1 {
        out[k] = (f[k + 1] - 2.0 * f[k] + f[k - 1]) * s;
    }
    out[n - 1] = (f[n - 2] - f[n - 1]) * s;
}

/// Node-centred gradient `(∂f/∂x₁, ∂f/∂x₂)`.
pub fn grad(f: &ScalarField) -> VectorField {
    VectorField {
        x: along(f, Axis::X, central_line),
        y: along(f, Axis::Y, central_line),
    }
}

/// Discrete divergence, the negative adjoint of [`grad`] under the
/// lumped-mass inner product.
pub fn div(vx: &ScalarField, vy: &ScalarField) -> Result<ScalarField> {
    vx.check_grid(vy)?;
    let mut out = along(vx, Axis::X, div_line);
    out.axpy(1.0, &along(vy, Axis::Y, div_line))?;
    Ok(out)
}

/// Compact 5-point Laplacian with zero-flux boundary faces.
pub fn laplace_neumann(f: &ScalarField) -> ScalarField {
    let mut out = along(f, Axis::X, laplace_line);
    out.axpy(1.0, &along(f, Axis::Y, laplace_line))
        .expect("same grid");
    out
}

/// `inner(a.x, b.x) + inner(a.y, b.y)`.
pub fn inner_vec(a: &VectorField, b: &VectorField) -> Result<f64> {
    Ok(a.x.inner(&b.x)? + a.y.inner(&b.y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;
    use proptest::prelude::*;

    fn interior(g: &Grid2D) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..g.ny() - 1).flat_map(move |j| (1..g.nx() - 1).map(move |i| (i, j)))
    }

    #[test]
    fn grad_of_constant_vanishes() {
        let g = Grid2D::square(7, 5, 0.1).unwrap();
        let v = grad(&ScalarField::constant(g, 3.5));
        assert_eq!(v.x.norm_linf(), 0.0);
        assert_eq!(v.y.norm_linf(), 0.0);
    }

    #[test]
    fn grad_exact_on_linear_and_quadratic_interior() {
        let g = Grid2D::square(9, 9, 0.1).unwrap();
        let lin = grad(&ScalarField::from_fn(g, |x, _| x));
        let quad = grad(&ScalarField::from_fn(g, |x, _| x * x));
        for (i, j) in interior(&g) {
            let (x, _) = g.coords(i, j);
            assert!((lin.x.at(i, j) - 1.0).abs() < 1e-12);
            assert!(lin.y.at(i, j).abs() < 1e-12);
            // central differences reproduce 2x exactly up to rounding
            assert!((quad.x.at(i, j) - 2.0 * x).abs() < 1e-12, "{} vs {}", quad.x.at(i, j), 2.0 * x);
        }
    }

    #[test]
    fn div_of_zero_and_constant_flux() {
        let g = Grid2D::square(6, 6, 0.1).unwrap();
        let z = ScalarField::zeros(g);
        assert_eq!(div(&z, &z).unwrap().norm_linf(), 0.0);

        // a constant flux has no interior sources; its boundary outflow is
        // cut off by the zero-flux faces, so only boundary nodes respond
        let one = ScalarField::constant(g, 1.0);
        let d = div(&one, &one).unwrap();
        for (i, j) in interior(&g) {
            assert_eq!(d.at(i, j), 0.0);
        }
        assert!(d.integral().abs() < 1e-12);
    }

    #[test]
    fn div_grid_mismatch() {
        let a = ScalarField::zeros(Grid2D::square(6, 6, 0.1).unwrap());
        let b = ScalarField::zeros(Grid2D::square(6, 7, 0.1).unwrap());
        assert!(div(&a, &b).is_err());
    }

    #[test]
    fn laplace_of_quadratic_interior_is_four() {
        let g = Grid2D::square(9, 9, 0.1).unwrap();
        let l = laplace_neumann(&ScalarField::from_fn(g, |x, y| x * x + y * y));
        for (i, j) in interior(&g) {
            assert!((l.at(i, j) - 4.0).abs() < 1e-9);
        }
        assert_eq!(laplace_neumann(&ScalarField::constant(g, 2.0)).norm_linf(), 0.0);
    }

    fn field_strategy(nx: usize, ny: usize) -> impl Strategy<Value = ScalarField> {
        proptest::collection::vec(-1.0f64..1.0, nx * ny).prop_map(move |v| {
            ScalarField::from_values(Grid2D::new(nx, ny, 0.1, 0.07).unwrap(), v).unwrap()
        })
    }

    proptest! {
        #[test]
        fn divergence_sums_to_zero(vx in field_strategy(6, 5), vy in field_strategy(6, 5)) {
            let d = div(&vx, &vy).unwrap();
            // direct summation oracle
            let total: f64 = d.values().iter().sum::<f64>() * vx.grid().cell_measure();
            let scale = vx.norm_l2() + vy.norm_l2();
            prop_assert!(total.abs() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn laplace_sums_to_zero(f in field_strategy(7, 4)) {
            prop_assert!(laplace_neumann(&f).integral().abs() < 1e-12);
        }

        #[test]
        fn summation_by_parts(f in field_strategy(6, 7), h in field_strategy(6, 7)) {
            let gf = grad(&f);
            let lhs = div(&gf.x, &gf.y).unwrap().inner(&h).unwrap();
            let rhs = -inner_vec(&gf, &grad(&h)).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-3));
        }

        #[test]
        fn operators_are_linear(f in field_strategy(5, 5), h in field_strategy(5, 5), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let combo = f.zip_map(&h, |x, y| a * x + b * y).unwrap();
            let lhs = laplace_neumann(&combo);
            let rhs = laplace_neumann(&f).zip_map(&laplace_neumann(&h), |x, y| a * x + b * y).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().norm_linf() < 1e-10);

            let gl = grad(&combo);
            let (gf, gh) = (grad(&f), grad(&h));
            let gx = gf.x.zip_map(&gh.x, |x, y| a * x + b * y).unwrap();
            prop_assert!(gl.x.sub(&gx).unwrap().norm_linf() < 1e-10);

            let dl = div(&combo, &combo).unwrap();
            let dr = div(&f, &f).unwrap().zip_map(&div(&h, &h).unwrap(), |x, y| a * x + b * y).unwrap();
            prop_assert!(dl.sub(&dr).unwrap().norm_linf() < 1e-9);
        }
    }
}
