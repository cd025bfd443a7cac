use crate::error::{ensure_positive, Error, Result};
use crate::stats::adaptive_simpson;

const REL_TOL: f64 = 1e-11;

/// `W^H_s`: 2 below `−s−1`, 1 on `[−s, s]`, `e^{2(x−s)}` above `s`, joined on
/// `[−s−1, −s]` by a cubic smoothstep.
pub fn wh_lyapunov(x: f64, s: f64) -> f64 {
    if x <= -s - 1.0 {
        2.0
    } else if x < -s {
        let t = x + s + 1.0;
        2.0 - t * t * (3.0 - 2.0 * t)
    } else if x <= s {
        1.0
    } else {
        (2.0 * (x - s)).exp()
    }
}

/// Left derivative of [`wh_lyapunov`]; the `η` flow moves downward, so this
/// is the one its generator sees.
pub fn wh_left_derivative(x: f64, s: f64) -> f64 {
    if x <= -s - 1.0 {
        0.0
    } else if x <= -s {
        let t = x + s + 1.0;
        -6.0 * t * (1.0 - t)
    } else if x <= s {
        0.0
    } else {
        2.0 * (2.0 * (x - s)).exp()
    }
}

/// `W(x + dz) − W(x)` for `dz ≥ 0`, without cancellation when both points
/// sit on the exponential branch.
fn increment(x: f64, dz: f64, s: f64) -> f64 {
    if x >= s {
        (2.0 * (x - s)).exp() * (2.0 * dz).exp_m1()
    } else {
        wh_lyapunov(x + dz, s) - wh_lyapunov(x, s)
    }
}

/// Integrates `e^{−u} g(u)` over `[0, ∞)` split at `kinks` and then on a
/// geometric grid until `e^{−u}` is negligible.
fn exp_weighted<F: Fn(f64) -> f64>(g: F, kinks: &[f64]) -> Result<f64> {
    let mut pts = vec![0.0];
    pts.extend(kinks.iter().copied().filter(|&u| u > 0.0 && u.is_finite()));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut top = pts.last().copied().unwrap_or(0.0).max(1.0);
    let end = top + 250.0;
    while top < end {
        top = (2.0 * top).min(end);
        pts.push(top);
    }
    let f = |u: f64| (-u).exp() * g(u);
    pts.windows(2)
        .map(|w| adaptive_simpson(&f, w[0], w[1], REL_TOL))
        .sum()
}

/// `H W^H_s(x) = −W'(x⁻) + e^{−βx} ∫_x^∞ q(x, z)(W(z) − W(x)) dz`.
///
/// The jump term is written as `∫_0^∞ e^{−u} (W(z(u)) − W(x)) du` with
/// `z(u) = ln(e^{βx} + βu) / β`, i.e. the kernel in its exponential
/// parametrization.
pub fn wh_generator(x: f64, s: f64, beta: f64) -> Result<f64> {
    ensure_positive("s", s)?;
    ensure_positive("beta", beta)?;
    let ebx = (beta * x).exp();
    // z(u) − x, computed without cancellation for large x
    let dz = |u: f64| {
        if beta * x > 0.0 {
            (beta * u / ebx).ln_1p() / beta
        } else {
            (ebx + beta * u).ln() / beta - x
        }
    };
    let kinks: Vec<f64> = [-s - 1.0, -s, s]
        .iter()
        .filter(|&&b| b > x)
        .map(|&b| ((beta * b).exp() - ebx) / beta)
        .collect();
    let jump = exp_weighted(|u| increment(x, dz(u), s), &kinks)?;
    let v = -wh_left_derivative(x, s) + (-beta * x).exp() * jump;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::QuadratureDiverged { a: x, b: f64::INFINITY })
    }
}

/// `E[W^H_s(G)]` where `G` has density `e^{βy} exp(−e^{βy}/β)`, the jump law
/// from `−∞`. Computed as `∫ e^{−u} W(ln(βu)/β) du`.
pub fn gumbel_expectation(s: f64, beta: f64) -> Result<f64> {
    ensure_positive("s", s)?;
    ensure_positive("beta", beta)?;
    let kinks: Vec<f64> = [-s - 1.0, -s, s]
        .iter()
        .map(|&b| (beta * b).exp() / beta)
        .collect();
    exp_weighted(|u| wh_lyapunov((beta * u).ln() / beta, s), &kinks)
}

/// Smallest `s` on the grid `0.25, 0.5, …` with `E[W^H_s(G)] ≤ 4/3`.
pub fn choose_s(beta: f64) -> Result<f64> {
    for i in 1..=400 {
        let s = 0.25 * i as f64;
        if gumbel_expectation(s, beta)? <= 4.0 / 3.0 {
            return Ok(s);
        }
    }
    Err(Error::invalid("beta", "no s up to 100 satisfies E[W(G)] <= 4/3"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub s: f64,
    pub gumbel_expectation: f64,
    /// Half-width of the region where `H W ≤ −W` may fail.
    pub c: f64,
    /// `max (H W + W)` over grid points inside `[−c, c]`.
    pub inner_bound: f64,
    /// `max (H W + W)` over grid points with `|x| > c`; non-positive when
    /// the drift inequality holds there.
    pub outer_max: f64,
    pub grid: Vec<f64>,
    pub generator: Vec<f64>,
}

/// Evaluates `H W^H_s + W^H_s` on `grid` and reports `c` such that the
/// inequality `H W ≤ −W` holds at every grid point with `|x| > c`. On each
/// side the crossing between the outermost failing grid point and its
/// passing outer neighbour is bisected, and `c` is the passing end of the
/// final bracket, so it does not depend on where the grid happens to fall.
pub fn drift_check(beta: f64, s: f64, grid: &[f64]) -> Result<DriftReport> {
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let excess_at = |x: f64| -> Result<f64> { Ok(wh_generator(x, s, beta)? + wh_lyapunov(x, s)) };
    let generator: Vec<f64> = grid
        .iter()
        .map(|&x| wh_generator(x, s, beta))
        .collect::<Result<_>>()?;
    let excess: Vec<f64> = grid
        .iter()
        .zip(&generator)
        .map(|(&x, h)| h + wh_lyapunov(x, s))
        .collect();
    let fails = |i: usize| excess[i] > 0.0;
    let mut c: f64 = 0.0;
    // outermost failures on each side and their outer neighbours
    let first = (0..grid.len()).find(|&i| fails(i));
    let last = (0..grid.len()).rev().find(|&i| fails(i));
    for (fail, outer) in [
        (first, first.and_then(|i| i.checked_sub(1))),
        (last, last.map(|i| i + 1).filter(|&i| i < grid.len())),
    ] {
        let Some(f) = fail else { continue };
        let edge = match outer {
            Some(o) => {
                let (mut bad, mut good) = (grid[f], grid[o]);
                for _ in 0..60 {
                    let mid = 0.5 * (bad + good);
                    if excess_at(mid)? > 0.0 {
                        bad = mid;
                    } else {
                        good = mid;
                    }
                }
                good.abs()
            }
            None => grid[f].abs(),
        };
        c = c.max(edge).max(grid[f].abs());
    }
    let fold = |inside: bool| {
        grid.iter()
            .zip(&excess)
            .filter(|(x, _)| (x.abs() <= c) == inside)
            .map(|(_, &e)| e)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(DriftReport {
        s,
        gumbel_expectation: gumbel_expectation(s, beta)?,
        c,
        inner_bound: fold(true),
        outer_max: fold(false),
        grid,
        generator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use crate::stats::max_fd_error;
    use rand_distr::{Distribution, Exp1};

    #[test]
    fn shape_of_w() {
        let s = 2.0;
        assert_eq!(wh_lyapunov(0.0, s), 1.0);
        assert_eq!(wh_lyapunov(s, s), 1.0);
        assert_eq!(wh_lyapunov(-s, s), 1.0);
        assert_eq!(wh_lyapunov(-s - 1.0, s), 2.0);
        assert_eq!(wh_lyapunov(-40.0, s), 2.0);
        let h = 1e-7;
        let right = (wh_lyapunov(s + h, s) - 1.0) / h;
        assert!((right - 2.0).abs() < 1e-5);
        for i in 0..=100 {
            let x = -s - 1.0 + 0.01 * i as f64;
            let w = wh_lyapunov(x, s);
            assert!((1.0..=2.0).contains(&w));
        }
    }

    #[test]
    fn bridge_is_c1() {
        let s = 1.5;
        let pts: Vec<f64> = (0..200).map(|i| -4.0 + 0.04 * i as f64 + 0.013).collect();
        let err = max_fd_error(|x| wh_lyapunov(x, s), |x| wh_left_derivative(x, s), &pts, 1e-6);
        assert!(err < 1e-6, "{err}");
        // no jump of the derivative at the ends of the bridge
        assert!(wh_left_derivative(-s - 1.0, s).abs() < 1e-15);
        assert!(wh_left_derivative(-s, s).abs() < 1e-15);
    }

    #[test]
    fn gumbel_expectation_matches_monte_carlo() {
        let (s, beta) = (1.0, 1.0);
        let q = gumbel_expectation(s, beta).unwrap();
        let mut rng = derive_stream(60, 0);
        let n = 400_000;
        let mc: f64 = (0..n)
            .map(|_| {
                let u: f64 = Exp1.sample(&mut rng);
                wh_lyapunov((beta * u).ln() / beta, s)
            })
            .sum::<f64>()
            / n as f64;
        assert!((q - mc).abs() < 0.01, "{q} vs {mc}");
    }

    #[test]
    fn chosen_s_meets_the_bound_and_is_minimal() {
        for beta in [0.5, 1.0, 2.0] {
            let s = choose_s(beta).unwrap();
            assert!(gumbel_expectation(s, beta).unwrap() <= 4.0 / 3.0);
            if s > 0.25 {
                assert!(gumbel_expectation(s - 0.25, beta).unwrap() > 4.0 / 3.0);
            }
        }
    }

    #[test]
    fn generator_matches_monte_carlo_jump_term() {
        let (s, beta) = (1.5f64, 1.0f64);
        let mut rng = derive_stream(61, 0);
        for x in [-3.0f64, -2.2, 0.4, 1.7] {
            let n = 400_000;
            let jump: f64 = (0..n)
                .map(|_| {
                    let u: f64 = Exp1.sample(&mut rng);
                    let z = ((beta * x).exp() + beta * u).ln() / beta;
                    wh_lyapunov(z, s) - wh_lyapunov(x, s)
                })
                .sum::<f64>()
                / n as f64;
            let mc = -wh_left_derivative(x, s) + (-beta * x).exp() * jump;
            let q = wh_generator(x, s, beta).unwrap();
            assert!((q - mc).abs() < 0.02 * (1.0 + mc.abs()), "x={x}: {q} vs {mc}");
        }
    }

    #[test]
    fn far_right_generator_is_dominated_by_the_drift() {
        let (s, beta) = (1.5, 1.0);
        for x in [10.0, 30.0, 50.0] {
            let h = wh_generator(x, s, beta).unwrap();
            let w = wh_lyapunov(x, s);
            assert!((h / w + 2.0).abs() < 1e-2, "{x}: {}", h / w);
        }
    }

    #[test]
    fn drift_report_on_a_small_grid() {
        let s = choose_s(1.0).unwrap();
        let grid: Vec<f64> = (0..=200).map(|i| -50.0 + 0.5 * i as f64).collect();
        let r = drift_check(1.0, s, &grid).unwrap();
        assert!(r.c >= s && r.c < 10.0, "{r:?}");
        assert!(r.outer_max <= 0.0);
        assert!(r.inner_bound.is_finite());
    }
}
