//! Three-state model: two wells `±` joined by a saddle `0`.
//!
//! In a well the bias `x` drifts at `±γ` and the walker climbs to the saddle
//! at the constant rate `λ_± = e^{−βD_±}`. At the saddle `x` is frozen and the
//! walker falls into `−` at rate `e^{βx}/λ_−` or into `+` at rate
//! `e^{−βx}/λ_+`.
//!
//! The invariant law has densities `μ_− = μ_+` and
//! `μ_0 = (λ_+λ_−² + λ_+²λ_−) μ_+ / (λ_+e^{βx} + λ_−e^{−βx})` with
//! `μ_+(x) ∝ e^{λ_− x/γ} (λ_+ e^{2βx} + λ_−)^{−(λ_+ + λ_−)/(2βγ)}`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{ensure_positive, Result};
use crate::hazard::log_add_exp;
use crate::stats::{adaptive_simpson, BatchEstimate, BatchMeans, TabulatedCdf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpParams {
    pub inv_temp: f64,
    pub deposition: f64,
    pub d_plus: f64,
    pub d_minus: f64,
}

impl SimpParams {
    pub fn new(inv_temp: f64, deposition: f64, d_plus: f64, d_minus: f64) -> Result<Self> {
        ensure_positive("beta", inv_temp)?;
        ensure_positive("gamma", deposition)?;
        ensure_positive("d_plus", d_plus)?;
        ensure_positive("d_minus", d_minus)?;
        Ok(Self {
            inv_temp,
            deposition,
            d_plus,
            d_minus,
        })
    }

    pub fn lambda_plus(&self) -> f64 {
        (-self.inv_temp * self.d_plus).exp()
    }

    pub fn lambda_minus(&self) -> f64 {
        (-self.inv_temp * self.d_minus).exp()
    }

    /// `γ(e^{βD_+} − e^{βD_−})`, the large-parameter behaviour of the mean.
    pub fn asymptotic_mean(&self) -> f64 {
        self.deposition * ((self.inv_temp * self.d_plus).exp() - (self.inv_temp * self.d_minus).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimpPhase {
    Minus,
    Zero,
    Plus,
}

impl SimpPhase {
    fn sign(self) -> f64 {
        match self {
            SimpPhase::Minus => -1.0,
            SimpPhase::Zero => 0.0,
            SimpPhase::Plus => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpState {
    pub x: f64,
    pub phase: SimpPhase,
    pub time: f64,
    /// Exact `∫_0^t x_s ds`.
    pub integral_x: f64,
}

impl SimpState {
    pub fn new(x: f64, phase: SimpPhase) -> Self {
        Self {
            x,
            phase,
            time: 0.0,
            integral_x: 0.0,
        }
    }

    fn flow(&mut self, dt: f64, gamma: f64) {
        let v = gamma * self.phase.sign();
        self.integral_x += dt * (self.x + 0.5 * v * dt);
        self.x += v * dt;
        self.time += dt;
    }
}

#[derive(Debug, Clone)]
pub struct SimpSummary {
    pub final_state: SimpState,
    pub mean: BatchEstimate,
    pub jumps: u64,
}

/// Exact event-driven simulation up to `horizon`. Every rate is constant
/// between jumps. `on_segment(state, dt)` sees each flow piece before it is
/// applied; batch means of `x` use `batches` blocks.
pub fn simp_simulate<R, F>(
    params: &SimpParams,
    init: SimpState,
    horizon: f64,
    batches: usize,
    rng: &mut R,
    mut on_segment: F,
) -> Result<SimpSummary>
where
    R: Rng + ?Sized,
    F: FnMut(&SimpState, f64),
{
    ensure_positive("horizon", horizon)?;
    let (lp, lm) = (params.lambda_plus(), params.lambda_minus());
    let (b, g) = (params.inv_temp, params.deposition);
    let mut state = init;
    let mut bm = BatchMeans::new(horizon, batches.max(2));
    let mut jumps = 0;
    let end = state.time + horizon;
    loop {
        let e: f64 = Exp1.sample(rng);
        let (dt, next) = match state.phase {
            SimpPhase::Plus => (e / lp, SimpPhase::Zero),
            SimpPhase::Minus => (e / lm, SimpPhase::Zero),
            SimpPhase::Zero => {
                let log_to_minus = b * state.x - lm.ln();
                let log_to_plus = -b * state.x - lp.ln();
                let total = log_add_exp(log_to_minus, log_to_plus);
                let u: f64 = rng.random();
                let to = if u < (log_to_minus - total).exp() {
                    SimpPhase::Minus
                } else {
                    SimpPhase::Plus
                };
                (e * (-total).exp(), to)
            }
        };
        let remaining = end - state.time;
        let step = dt.min(remaining);
        on_segment(&state, step);
        bm.push_linear(state.x, g * state.phase.sign(), step);
        state.flow(step, g);
        if dt >= remaining {
            break;
        }
        state.phase = next;
        jumps += 1;
    }
    Ok(SimpSummary {
        final_state: state,
        mean: bm.estimate(),
        jumps,
    })
}

/// Unnormalised log of `μ_+`.
fn log_mu_plus(x: f64, p: &SimpParams) -> f64 {
    let (lp, lm) = (p.lambda_plus(), p.lambda_minus());
    let (b, g) = (p.inv_temp, p.deposition);
    // ln(λ_+ e^{2βx} + λ_−)
    let log_sum = log_add_exp(lp.ln() + 2.0 * b * x, lm.ln());
    lm * x / g - (lp + lm) / (2.0 * b * g) * log_sum
}

/// `ln(μ_0/μ_+)`.
fn log_zero_ratio(x: f64, p: &SimpParams) -> f64 {
    let (lp, lm) = (p.lambda_plus(), p.lambda_minus());
    let b = p.inv_temp;
    (lp * lm * (lp + lm)).ln() - log_add_exp(lp.ln() + b * x, lm.ln() - b * x)
}

/// Unnormalised log density of the `x` marginal `μ_− + μ_0 + μ_+`.
fn log_marginal(x: f64, p: &SimpParams) -> f64 {
    log_mu_plus(x, p) + log_add_exp(2f64.ln(), log_zero_ratio(x, p))
}

/// Normalised invariant density with its truncated support.
#[derive(Debug, Clone)]
pub struct SimpDensity {
    params: SimpParams,
    log_norm: f64,
    peak: f64,
    lo: f64,
    hi: f64,
}

impl SimpDensity {
    /// Locates the mode, truncates where the marginal falls below `1e-16`
    /// of its peak, and normalises by adaptive quadrature.
    pub fn new(params: &SimpParams) -> Result<Self> {
        let p = *params;
        // μ_+ is log-concave with its mode at ln(λ_−/λ_+)/β
        let (lp, lm) = (p.lambda_plus(), p.lambda_minus());
        let centre = (lm / lp).ln() / p.inv_temp;
        let f = |x: f64| log_marginal(x, &p);
        let reach = 50.0 / p.inv_temp + 50.0 * p.deposition;
        let peak_x = golden_max(&f, centre - reach, centre + reach);
        let peak = f(peak_x);
        let cut = peak - 16.0 * std::f64::consts::LN_10;
        let lo = expand_until(&f, peak_x, -1.0, cut);
        let hi = expand_until(&f, peak_x, 1.0, cut);
        let mass = integrate_split(|x| (f(x) - peak).exp(), lo, peak_x, hi)?;
        Ok(Self {
            params: p,
            log_norm: peak + mass.ln(),
            peak: peak_x,
            lo,
            hi,
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn mode(&self) -> f64 {
        self.peak
    }

    /// `(μ_−(x), μ_0(x), μ_+(x))`.
    pub fn densities(&self, x: f64) -> (f64, f64, f64) {
        let lp = log_mu_plus(x, &self.params) - self.log_norm;
        let plus = lp.exp();
        let zero = (lp + log_zero_ratio(x, &self.params)).exp();
        (plus, zero, plus)
    }

    pub fn marginal(&self, x: f64) -> f64 {
        (log_marginal(x, &self.params) - self.log_norm).exp()
    }

    pub fn mean(&self) -> Result<f64> {
        integrate_split(|x| x * self.marginal(x), self.lo, self.peak, self.hi)
    }

    pub fn total_mass(&self) -> Result<f64> {
        integrate_split(|x| self.marginal(x), self.lo, self.peak, self.hi)
    }

    /// Marginal CDF tabulated on the truncated support.
    pub fn tabulated_cdf(&self, cells: usize) -> Result<TabulatedCdf> {
        TabulatedCdf::new(|x| self.marginal(x), self.lo, self.hi, cells)
    }
}

/// `(μ_−(x), μ_0(x), μ_+(x))` of the normalised invariant law.
pub fn simp_invariant_density(x: f64, params: &SimpParams) -> Result<(f64, f64, f64)> {
    Ok(SimpDensity::new(params)?.densities(x))
}

/// Mean of `x` under the invariant law.
pub fn simp_mean_quadrature(params: &SimpParams) -> Result<f64> {
    SimpDensity::new(params)?.mean()
}

fn integrate_split<F: Fn(f64) -> f64>(f: F, lo: f64, mid: f64, hi: f64) -> Result<f64> {
    Ok(adaptive_simpson(&f, lo, mid, 1e-12)? + adaptive_simpson(&f, mid, hi, 1e-12)?)
}

/// Maximiser of a unimodal function on `[a, b]`.
fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= 1e-12 * (1.0 + a.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Walks from `start` in direction `sign` with doubling steps until `f`
/// drops below `cut`, then bisects the crossing.
fn expand_until<F: Fn(f64) -> f64>(f: &F, start: f64, sign: f64, cut: f64) -> f64 {
    let mut step = 1e-3 * (1.0 + start.abs());
    let mut inner = start;
    let mut outer = start + sign * step;
    while f(outer) > cut {
        inner = outer;
        step *= 2.0;
        outer = start + sign * step;
    }
    for _ in 0..80 {
        let mid = 0.5 * (inner + outer);
        if f(mid) > cut {
            inner = mid;
        } else {
            outer = mid;
        }
    }
    outer
}
