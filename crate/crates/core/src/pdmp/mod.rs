//! Discrete-state adiabatic metadynamics on the segment `{0, …, K}`.
//!
//! A walker `I_t` jumps between neighbouring sites while the edge
//! variables `X_t(k) = γ(L_t(k) − L_t(k−1))` record differences of local
//! times. While the walker sits at `i`, `X(i)` grows and `X(i+1)` shrinks at
//! speed `γ`; it jumps left at rate `exp(β(X(i) + A'_i))` and right at rate
//! `exp(−β(X(i+1) + A'_{i+1}))`.
//!
//! The state stores the *tilt* `X(k) + A'_k` rather than `X(k)`: rates only
//! depend on the tilt, and a run in landscape `A` started from `x_0` performs
//! exactly the same floating-point operations as a flat run started from
//! `x_0 + A'`.

mod invariant;
mod sim;

pub use invariant::{
    generator_apply, invariant_expectation, invariant_marginal_density, BumpPolynomial,
    MarginalDensity, TestFunction,
};
pub use sim::{
    clt_variance, flatten_equivalence, gamma_rescale_equivalence, simulate, simulate_logged,
    EventLog, JumpEvent, MarginalSampler, Observer, Trajectory, EVENT_LOG_CAP,
};

use rand::Rng;

use crate::error::{ensure_positive, Error, Result};
use crate::hazard::{sample_shared_envelope, Direction};

/// Free-energy profile `A_0..A_K` with increments `A'_k = A_k − A_{k−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    values: Vec<f64>,
    increments: Vec<f64>,
}

impl Landscape {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("A", "need at least two sites (K >= 1)"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("A", "values must be finite"));
        }
        let increments = values.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { values, increments })
    }

    pub fn flat(edges: usize) -> Self {
        Self::new(vec![0.0; edges + 1]).expect("K >= 1")
    }

    /// Number of edges `K`; sites are `0..=K`.
    pub fn edges(&self) -> usize {
        self.increments.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `A'_1..A'_K`, stored at indices `0..K`.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `A'_k` for the 1-based edge `k`.
    pub fn increment(&self, edge: usize) -> f64 {
        self.increments[edge - 1]
    }

    pub fn is_flat(&self) -> bool {
        self.increments.iter().all(|&d| d == 0.0)
    }

    /// The landscape `factor · A`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.values.iter().map(|v| v * factor).collect()).expect("finite scale")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub inv_temp: f64,
    pub deposition: f64,
    pub horizon: f64,
}

impl SimParams {
    pub fn new(inv_temp: f64, deposition: f64, horizon: f64) -> Result<Self> {
        ensure_positive("beta", inv_temp)?;
        ensure_positive("gamma", deposition)?;
        ensure_positive("horizon", horizon)?;
        Ok(Self {
            inv_temp,
            deposition,
            horizon,
        })
    }

    /// Exponential growth rate `βγ` shared by both jump hazards.
    pub fn growth(&self) -> f64 {
        self.inv_temp * self.deposition
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdmpState {
    tilt: Vec<f64>,
    shift: Vec<f64>,
    site: usize,
    time: f64,
    local_times: Vec<f64>,
    tilt_integral: Vec<f64>,
}

impl PdmpState {
    /// Starts at edge values `x0` (length `K`) and site `site` in `landscape`.
    pub fn new(x0: &[f64], site: usize, landscape: &Landscape) -> Result<Self> {
        let k = landscape.edges();
        if x0.len() != k {
            return Err(Error::invalid("x0", format!("expected {k} entries, got {}", x0.len())));
        }
        if site > k {
            return Err(Error::invalid("site", format!("must be in 0..={k}, got {site}")));
        }
        Ok(Self {
            tilt: x0.iter().zip(landscape.increments()).map(|(x, a)| x + a).collect(),
            shift: landscape.increments().to_vec(),
            site,
            time: 0.0,
            local_times: vec![0.0; k + 1],
            tilt_integral: vec![0.0; k],
        })
    }

    pub fn at_rest(site: usize, landscape: &Landscape) -> Result<Self> {
        Self::new(&vec![0.0; landscape.edges()], site, landscape)
    }

    pub fn edges(&self) -> usize {
        self.tilt.len()
    }

    pub fn site(&self) -> usize {
        self.site
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn local_times(&self) -> &[f64] {
        &self.local_times
    }

    /// `X(k) + A'_k` for the 1-based edge `k`.
    pub fn tilt(&self, edge: usize) -> f64 {
        self.tilt[edge - 1]
    }

    pub fn tilts(&self) -> &[f64] {
        &self.tilt
    }

    /// `X(k)` for the 1-based edge `k`.
    pub fn x(&self, edge: usize) -> f64 {
        self.tilt[edge - 1] - self.shift[edge - 1]
    }

    pub fn xs(&self) -> Vec<f64> {
        (1..=self.edges()).map(|k| self.x(k)).collect()
    }

    /// `∫_0^t X_s(k) ds` for the 1-based edge `k`.
    pub fn integral_x(&self, edge: usize) -> f64 {
        self.tilt_integral[edge - 1] - self.shift[edge - 1] * self.time
    }

    /// Velocity of edge `k` while the walker sits at the current site.
    fn edge_velocity(&self, edge: usize, gamma: f64) -> f64 {
        if edge == self.site {
            gamma
        } else if edge == self.site + 1 {
            -gamma
        } else {
            0.0
        }
    }

    /// `X(k)` after a further `dt` at the current site, without mutating.
    pub fn x_after(&self, edge: usize, dt: f64, gamma: f64) -> f64 {
        self.x(edge) + self.edge_velocity(edge, gamma) * dt
    }

    /// Moves the walker one site in `dir`.
    pub fn jump(&mut self, dir: Direction) {
        match dir {
            Direction::Left => {
                debug_assert!(self.site > 0);
                self.site -= 1;
            }
            Direction::Right => {
                debug_assert!(self.site < self.edges());
                self.site += 1;
            }
        }
    }
}

/// Log jump rates `(left, right)` from the current site; `None` at the
/// boundary.
pub fn log_jump_rates(state: &PdmpState, params: &SimParams) -> (Option<f64>, Option<f64>) {
    let i = state.site;
    let b = params.inv_temp;
    let left = (i > 0).then(|| b * state.tilt[i - 1]);
    let right = (i < state.edges()).then(|| -b * state.tilt[i]);
    (left, right)
}

pub fn jump_rates(state: &PdmpState, params: &SimParams) -> (Option<f64>, Option<f64>) {
    let (l, r) = log_jump_rates(state, params);
    (l.map(f64::exp), r.map(f64::exp))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NextEvent {
    pub dt: f64,
    pub direction: Direction,
}

/// Samples the next jump exactly. Both active hazards grow like `e^{βγs}`
/// while the walker stays put, so the total hazard is inverted in closed
/// form and the direction follows the (constant) ratio of the two rates.
pub fn sample_next_event<R: Rng + ?Sized>(
    state: &PdmpState,
    params: &SimParams,
    rng: &mut R,
) -> NextEvent {
    let (l, r) = log_jump_rates(state, params);
    let (dt, direction) = sample_shared_envelope(l, r, params.growth(), rng);
    NextEvent { dt, direction }
}

/// Flows the state for `dt` without jumping.
pub fn advance(state: &mut PdmpState, dt: f64, params: &SimParams) -> Result<()> {
    if !(dt >= 0.0) {
        return Err(Error::invalid("dt", format!("must be non-negative, got {dt}")));
    }
    advance_unchecked(state, dt, params.deposition);
    Ok(())
}

#[inline]
pub(crate) fn advance_unchecked(state: &mut PdmpState, dt: f64, gamma: f64) {
    if dt == 0.0 {
        return;
    }
    let i = state.site;
    let k = state.edges();
    for (v, acc) in state.tilt.iter().zip(state.tilt_integral.iter_mut()) {
        *acc += v * dt;
    }
    let half = 0.5 * gamma * dt * dt;
    if i > 0 {
        state.tilt_integral[i - 1] += half;
        state.tilt[i - 1] += gamma * dt;
    }
    if i < k {
        state.tilt_integral[i] -= half;
        state.tilt[i] -= gamma * dt;
    }
    state.local_times[i] += dt;
    state.time += dt;
}

#[cfg(test)]
mod tests;
