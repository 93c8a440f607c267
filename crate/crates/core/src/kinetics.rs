//! Bounded proliferation and proton efflux kinetics.
//!
//! `f1(u1, u2) = u1 (1 - u1)(1 - u2) / (1 + u1² + u2²)²`
//! `f2(u1, u2) = u1 u2 / (1 + u1² + u2²)²`

/// Values and first partials of both reaction terms at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticsEval {
    pub f1: f64,
    pub f2: f64,
    pub d1f1: f64,
    pub d2f1: f64,
    pub d1f2: f64,
    pub d2f2: f64,
}

#[inline]
fn denom(u1: f64, u2: f64) -> f64 {
    1.0 + u1 * u1 + u2 * u2
}

#[inline]
pub fn eval_f1(u1: f64, u2: f64) -> f64 {
    let d = denom(u1, u2);
    u1 * (1.0 - u1) * (1.0 - u2) / (d * d)
}

#[inline]
pub fn eval_f2(u1: f64, u2: f64) -> f64 {
    let d = denom(u1, u2);
    u1 * u2 / (d * d)
}

/// `(∂f1/∂u1, ∂f1/∂u2)`
#[inline]
pub fn partials_f1(u1: f64, u2: f64) -> (f64, f64) {
    let d = denom(u1, u2);
    let d2 = d * d;
    let d3 = d2 * d;
    let g = u1 * (1.0 - u1);
    let dg = 1.0 - 2.0 * u1;
    let w = 1.0 - u2;
    // quotient rule on N / D² with ∂D/∂u = 2u
    let du1 = dg * w / d2 - 4.0 * u1 * g * w / d3;
    let du2 = -g / d2 - 4.0 * u2 * g * w / d3;
    (du1, du2)
}

/// `(∂f2/∂u1, ∂f2/∂u2)`
#[inline]
pub fn partials_f2(u1: f64, u2: f64) -> (f64, f64) {
    let d = denom(u1, u2);
    let d2 = d * d;
    let d3 = d2 * d;
    let p = u1 * u2;
    (u2 / d2 - 4.0 * u1 * p / d3, u1 / d2 - 4.0 * u2 * p / d3)
}

pub fn eval(u1: f64, u2: f64) -> KineticsEval {
    let (d1f1, d2f1) = partials_f1(u1, u2);
    let (d1f2, d2f2) = partials_f2(u1, u2);
    KineticsEval {
        f1: eval_f1(u1, u2),
        f2: eval_f2(u1, u2),
        d1f1,
        d2f1,
        d1f2,
        d2f2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice() -> impl Iterator<Item = (f64, f64)> {
        (0..21).flat_map(|a| (0..21).map(move |b| (a as f64 * 0.1, b as f64 * 0.1)))
    }

    #[test]
    fn hand_evaluated_values() {
        assert_eq!(eval_f1(0.0, 0.5), 0.0);
        assert_eq!(eval_f1(1.0, 0.3), 0.0);
        // 0.5·0.5·0.5 / 1.5² = 0.125 / 2.25
        assert!((eval_f1(0.5, 0.5) - 0.125 / 2.25).abs() < 1e-15);
        assert_eq!(eval_f2(0.7, 0.0), 0.0);
        assert!((eval_f2(1.0, 1.0) - 1.0 / 9.0).abs() < 1e-15);
        assert!((eval_f2(0.5, 0.5) - 0.25 / 2.25).abs() < 1e-15);
    }

    #[test]
    fn hand_evaluated_partials() {
        assert!((partials_f1(0.0, 0.0).0 - 1.0).abs() < 1e-15);
        assert!((partials_f2(1.0, 0.0).1 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn partials_match_central_differences() {
        let h = 1e-6;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-3);
        for (u1, u2) in lattice() {
            let (a1, a2) = partials_f1(u1, u2);
            let (b1, b2) = partials_f2(u1, u2);
            let fd = |f: fn(f64, f64) -> f64, dir: usize| {
                if dir == 0 {
                    (f(u1 + h, u2) - f(u1 - h, u2)) / (2.0 * h)
                } else {
                    (f(u1, u2 + h) - f(u1, u2 - h)) / (2.0 * h)
                }
            };
            assert!(rel(a1, fd(eval_f1, 0)) <= 1e-6, "d1f1 at ({u1},{u2})");
            assert!(rel(a2, fd(eval_f1, 1)) <= 1e-6, "d2f1 at ({u1},{u2})");
            assert!(rel(b1, fd(eval_f2, 0)) <= 1e-6, "d1f2 at ({u1},{u2})");
            assert!(rel(b2, fd(eval_f2, 1)) <= 1e-6, "d2f2 at ({u1},{u2})");
        }
    }

    #[test]
    fn zero_sets_and_bounds() {
        for (u1, u2) in lattice() {
            assert_eq!(eval_f1(0.0, u2), 0.0);
            assert_eq!(eval_f1(1.0, u2), 0.0);
            assert_eq!(eval_f1(u1, 1.0), 0.0);
            assert_eq!(eval_f2(0.0, u2), 0.0);
            assert_eq!(eval_f2(u1, 0.0), 0.0);
            assert!(eval_f1(u1, u2).abs() <= 1.0);
            assert!(eval_f2(u1, u2).abs() <= 1.0);
        }
    }
}
