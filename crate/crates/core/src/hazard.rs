//! Exact sampling of event times for hazards of the form `r·e^{a s}`.
//!
//! All the piecewise-deterministic processes here have hazards that are
//! exponential (or constant) in the time elapsed since the last jump, so the
//! integrated hazard `r (e^{a s} − 1) / a` can be inverted in closed form.
//! Rates are handled through their logarithms so that `βx` far beyond the
//! range of `exp` is still well defined.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Left,
    Right,
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 35.0 {
        z + (-z).exp()
    } else {
        z.exp().ln_1p()
    }
}

/// `ln(e^a + e^b)` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Time at which the integrated hazard of `e^{log_rate} e^{growth·s}`
/// reaches `e`. Returns `+∞` if a decaying hazard never accumulates `e`.
#[inline]
pub fn invert_exp_hazard(log_rate: f64, growth: f64, e: f64) -> f64 {
    if growth == 0.0 {
        e * (-log_rate).exp()
    } else if growth > 0.0 {
        softplus((growth * e).ln() - log_rate) / growth
    } else {
        let g = -growth;
        let x = g * e * (-log_rate).exp();
        if x >= 1.0 {
            f64::INFINITY
        } else {
            -(-x).ln_1p() / g
        }
    }
}

/// Next event among at most two competing hazards sharing the same growth
/// envelope `e^{growth·s}`. The ratio of the two hazards is then constant in
/// time, so the direction is drawn from the initial rates.
///
/// Draw order: one `Exp(1)` for the time, then one uniform for the
/// direction only when both sides are active.
pub fn sample_shared_envelope<R: Rng + ?Sized>(
    log_left: Option<f64>,
    log_right: Option<f64>,
    growth: f64,
    rng: &mut R,
) -> (f64, Direction) {
    let e: f64 = Exp1.sample(rng);
    match (log_left, log_right) {
        (Some(l), None) => (invert_exp_hazard(l, growth, e), Direction::Left),
        (None, Some(r)) => (invert_exp_hazard(r, growth, e), Direction::Right),
        (Some(l), Some(r)) => {
            let total = log_add_exp(l, r);
            let dt = invert_exp_hazard(total, growth, e);
            let p_left = (l - total).exp();
            let u: f64 = rng.random();
            let dir = if u < p_left {
                Direction::Left
            } else {
                Direction::Right
            };
            (dt, dir)
        }
        (None, None) => (f64::INFINITY, Direction::Right),
    }
}

/// Next event among two independent hazards with possibly different growth
/// rates: each clock is inverted on its own and the earliest fires. Draws
/// one `Exp(1)` per active side, left first.
pub fn sample_competing<R: Rng + ?Sized>(
    left: Option<(f64, f64)>,
    right: Option<(f64, f64)>,
    rng: &mut R,
) -> (f64, Direction) {
    let tl = left.map_or(f64::INFINITY, |(lr, g)| {
        invert_exp_hazard(lr, g, Exp1.sample(rng))
    });
    let tr = right.map_or(f64::INFINITY, |(lr, g)| {
        invert_exp_hazard(lr, g, Exp1.sample(rng))
    });
    if tl <= tr {
        (tl, Direction::Left)
    } else {
        (tr, Direction::Right)
    }
}
