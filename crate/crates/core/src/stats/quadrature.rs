use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-10;

const PANELS: usize = 16;
const MAX_DEPTH: u32 = 40;

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    let noise = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if delta.abs() <= (15.0 * eps).max(noise) || (b - a) <= 4.0 * f64::EPSILON * m.abs().max(1.0) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureDiverged { a, b });
    }
    Ok(refine(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)?
        + refine(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)?)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to relative tolerance
/// `rel_tol`, measured against a coarse estimate of the integral of `|f|`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("bounds", "must be finite"));
    }
    let h = (b - a) / PANELS as f64;
    let nodes: Vec<f64> = (0..=2 * PANELS).map(|i| f(a + 0.5 * h * i as f64)).collect();
    if nodes.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("integrand", "not finite on the interval"));
    }
    let scale: f64 = (0..PANELS)
        .map(|p| simpson(nodes[2 * p].abs(), nodes[2 * p + 1].abs(), nodes[2 * p + 2].abs(), h))
        .sum::<f64>()
        .abs();
    let eps = (rel_tol * scale).max(f64::MIN_POSITIVE) / PANELS as f64;
    let mut total = 0.0;
    for p in 0..PANELS {
        let lo = a + h * p as f64;
        let hi = lo + h;
        let (fa, fm, fb) = (nodes[2 * p], nodes[2 * p + 1], nodes[2 * p + 2]);
        let whole = simpson(fa, fm, fb, h);
        total += refine(&f, lo, hi, fa, fm, fb, whole, eps, MAX_DEPTH)?;
    }
    Ok(total)
}

/// Adaptive Simpson with [`DEFAULT_REL_TOL`], applied piecewise over the
/// given breakpoints. Splitting at kinks or near sharp features keeps the
/// recursion shallow.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breakpoints: &[f64]) -> Result<f64> {
    breakpoints
        .windows(2)
        .map(|w| adaptive_simpson(&f, w[0], w[1], DEFAULT_REL_TOL))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn square_on_unit_interval() {
        let v = adaptive_simpson(|x| x * x, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn cosh_weight_matches_dense_trapezoid() {
        let f = |x: f64| (-2.0 * x.cosh()).exp();
        let quad = adaptive_simpson(f, -12.0, 12.0, 1e-12).unwrap();
        // dense trapezoid oracle
        let n = 1_000_000;
        let (lo, hi) = (-12.0, 12.0);
        let h = (hi - lo) / n as f64;
        let mut trap = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            trap += f(lo + h * i as f64);
        }
        trap *= h;
        assert!((quad - trap).abs() < 1e-8, "{quad} vs {trap}");
    }

    #[test]
    fn periodized_gaussian_has_unit_mass() {
        let eps = 2.0 * PI / 40.0;
        let g = |x: f64| {
            (-5..=5)
                .map(|m| {
                    let d = x - 0.3 - 2.0 * PI * m as f64;
                    (-d * d / (2.0 * eps * eps)).exp()
                })
                .sum::<f64>()
                / ((2.0 * PI).sqrt() * eps)
        };
        let v = integrate(g, &[-PI, -1.0, 0.0, 0.3, 1.0, PI]).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn non_finite_integrand_is_rejected() {
        assert!(adaptive_simpson(|x| 1.0 / x, 0.0, 1.0, 1e-8).is_err());
    }

    #[test]
    fn interior_jump_exhausts_depth() {
        let step = |x: f64| if x < 1.0 / 3.0 { 0.0 } else { 1.0 };
        assert!(matches!(
            adaptive_simpson(step, 0.0, 1.0, 1e-12),
            Err(Error::QuadratureDiverged { .. })
        ));
        // a kink in the same place converges
        let v = adaptive_simpson(|x: f64| (x - 1.0 / 3.0).abs(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 5.0 / 18.0).abs() < 1e-12);
    }
}
