//! Ray-Knight description of local-time profiles for the flat discrete
//! model with unit deposition rate.
//!
//! The edge variable `X(k)` seen only while the walker sits at `k−1`
//! (clocked by `L(k−1)`) is a Markov process `η⁻_k` that drifts down at unit
//! speed and jumps up at rate `e^{−βy}`, the jump landing according to the
//! kernel `q(y, z) = e^{βz} exp(−∫_y^z e^{βs} ds)` on `z ≥ y`. The same holds
//! for `η⁺_k = −X(k)` clocked by `L(k)`. Stopping at the inverse local time
//! `T_{j,r}` turns the profile `k ↦ L_{T_{j,r}}(k)` into a walk driven by
//! independent copies of these processes.

mod lyapunov;
mod profile;

pub use lyapunov::{
    choose_s, drift_check, gumbel_expectation, wh_generator, wh_left_derivative, wh_lyapunov,
    DriftReport,
};
pub use profile::{
    direct_profile, direct_profile_sim, extract_eta_minus, rk_walk_profile, simulate_to_local_time, EtaPath,
    EtaSegment, LocalTimeProfile,
};

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{ensure_positive, Error, Result};
use crate::hazard::{invert_exp_hazard, log_add_exp};

/// `∫_x^∞ q(y, z) dz = exp(−(e^{β(x∨y)} − e^{βy}) / β)`.
pub fn q_survival(y: f64, x: f64, beta: f64) -> f64 {
    if x <= y {
        return 1.0;
    }
    // (e^{βx} − e^{βy})/β = exp(βy + ln(expm1(β(x−y))) − ln β)
    let d = beta * (x - y);
    let log_expm1 = if d > 30.0 { d + (-(-d).exp()).ln_1p() } else { d.exp_m1().ln() };
    let log_mass = beta * y + log_expm1 - beta.ln();
    (-log_mass.exp()).exp()
}

/// The point `z ≥ y` whose `q(y, ·)` survival probability is `e^{−e}`:
/// `z = ln(e^{βy} + β e) / β`, evaluated as a log-sum-exp.
pub fn q_inverse(y: f64, beta: f64, e: f64) -> f64 {
    log_add_exp(beta * y, (beta * e).ln()) / beta
}

/// Inverse-transform draw from `q(y, ·)` using the uniform `u`
/// (`z = ln(e^{βy} − β ln u) / β`).
pub fn q_from_uniform(y: f64, beta: f64, u: f64) -> f64 {
    q_inverse(y, beta, -u.ln())
}

pub fn q_sample<R: Rng + ?Sized>(y: f64, beta: f64, rng: &mut R) -> f64 {
    q_inverse(y, beta, Exp1.sample(rng))
}

/// Initial law of an `η` process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaStart {
    /// `δ_y`.
    Point(f64),
    /// `q(y, z) dz`.
    Kernel(f64),
}

impl EtaStart {
    /// Initial law of `η⁻_k` for a walk started at `i0` with `X_0(k) = x0k`.
    pub fn minus(k: usize, i0: usize, x0k: f64) -> Self {
        if i0 < k {
            Self::Point(x0k)
        } else {
            Self::Kernel(x0k)
        }
    }

    /// Initial law of `η⁺_k`.
    pub fn plus(k: usize, i0: usize, x0k: f64) -> Self {
        if i0 < k {
            Self::Kernel(-x0k)
        } else {
            Self::Point(-x0k)
        }
    }

    pub fn draw<R: Rng + ?Sized>(self, beta: f64, rng: &mut R) -> f64 {
        match self {
            Self::Point(y) => y,
            Self::Kernel(y) => q_sample(y, beta, rng),
        }
    }
}

/// One `η` path: value `y` at local clock `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaProcess {
    pub y: f64,
    pub s: f64,
    pub beta: f64,
}

impl EtaProcess {
    pub fn new(y: f64, beta: f64) -> Self {
        Self { y, s: 0.0, beta }
    }

    /// Elapsed time until the next jump from the current value, for the
    /// unit-exponential draw `e`: inverts `e^{−βy}(e^{βu} − 1)/β = e`.
    pub fn time_to_jump(&self, e: f64) -> f64 {
        invert_exp_hazard(-self.beta * self.y, self.beta, e)
    }

    /// Runs the process up to clock `target`.
    pub fn run_to<R: Rng + ?Sized>(&mut self, target: f64, rng: &mut R) {
        let b = self.beta;
        while self.s < target {
            let u = self.time_to_jump(Exp1.sample(rng));
            if self.s + u >= target {
                self.y -= target - self.s;
                self.s = target;
                return;
            }
            self.s += u;
            self.y = q_sample(self.y - u, b, rng);
        }
    }
}

/// `η(s_target)` for an `η` process started from `start`.
pub fn eta_simulate<R: Rng + ?Sized>(
    start: EtaStart,
    s_target: f64,
    beta: f64,
    rng: &mut R,
) -> Result<f64> {
    ensure_positive("beta", beta)?;
    if !(s_target >= 0.0) {
        return Err(Error::invalid("s_target", format!("must be non-negative, got {s_target}")));
    }
    let mut eta = EtaProcess::new(start.draw(beta, rng), beta);
    eta.run_to(s_target, rng);
    Ok(eta.y)
}

/// Unnormalized log-density of the stationary law `ν ∝ exp(−(2/β) cosh βx)`
/// of the `η` processes, shifted to vanish at 0.
pub fn nu_log_density(x: f64, beta: f64) -> f64 {
    let s = (0.5 * beta * x).sinh();
    -(4.0 / beta) * s * s
}
