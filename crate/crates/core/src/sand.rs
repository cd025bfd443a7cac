//! Geometry of edge configurations: the computational sand `S`, separated
//! configurations and their plateaus, and the drift identity of `S` along
//! trajectories.

use std::ops::Range;

use crate::error::{ensure_positive, Error, Result};
use crate::hazard::Direction;
use crate::pdmp::{Observer, PdmpState, Trajectory};

/// Discrete antiderivative `l_0..l_K` of an edge vector `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    levels: Vec<f64>,
}

impl Profile {
    pub fn from_increments(x: &[f64], l0: f64) -> Self {
        let mut levels = Vec::with_capacity(x.len() + 1);
        levels.push(l0);
        let mut acc = l0;
        for &v in x {
            acc += v;
            levels.push(acc);
        }
        Self { levels }
    }

    pub fn from_levels(levels: Vec<f64>) -> Self {
        Self { levels }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn increments(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Volume needed to fill every level up to the maximum.
    pub fn sand(&self) -> f64 {
        let top = self.levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.levels.iter().map(|l| top - l).sum()
    }
}

/// `S(x) = Σ_i (max_j l_j − l_i)`.
pub fn sand(x: &[f64]) -> f64 {
    Profile::from_increments(x, 0.0).sand()
}

/// Thresholds `(t, a, A)`: small components satisfy `|x_j| ≤ a t`, large
/// ones `|x_j| > A t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationParams {
    pub t: f64,
    pub a: f64,
    pub big_a: f64,
}

impl SeparationParams {
    pub fn new(t: f64, a: f64, big_a: f64) -> Result<Self> {
        ensure_positive("t", t)?;
        ensure_positive("a", a)?;
        if !(big_a > a) {
            return Err(Error::invalid("A", format!("must exceed a = {a}, got {big_a}")));
        }
        Ok(Self { t, a, big_a })
    }

    fn small(&self) -> f64 {
        self.a * self.t
    }

    fn large(&self) -> f64 {
        self.big_a * self.t
    }
}

pub fn is_separated(x: &[f64], p: &SeparationParams) -> bool {
    let (s, l) = (p.small(), p.large());
    x.iter().all(|v| v.abs() <= s || v.abs() > l) && x.iter().any(|v| v.abs() > l)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plateaus {
    /// Site ranges `l..r`, left to right.
    pub intervals: Vec<Range<usize>>,
    /// Set when the input was not separated; `intervals` is then empty.
    pub not_separated: bool,
}

/// Sites `{l, …, r−1}` such that every inner edge is small (`|x_j| < a t`
/// for `l < j < r`), the left edge is a steep rise (`x_l > A t`) unless
/// `l = 0`, and the right edge is a steep drop (`x_r < −A t`) unless
/// `r = K + 1`.
pub fn plateaus(x: &[f64], p: &SeparationParams) -> Plateaus {
    if !is_separated(x, p) {
        return Plateaus {
            intervals: Vec::new(),
            not_separated: true,
        };
    }
    let k = x.len();
    let edge = |j: usize| x[j - 1];
    let (s, big) = (p.small(), p.large());
    let mut intervals = Vec::new();
    for l in 0..=k {
        if l > 0 && !(edge(l) > big) {
            continue;
        }
        let mut r = l + 1;
        while r <= k && edge(r).abs() < s {
            r += 1;
        }
        if r == k + 1 || edge(r) < -big {
            intervals.push(l..r);
        }
    }
    Plateaus {
        intervals,
        not_separated: false,
    }
}

/// `W(x) = exp(χ S(x))`.
pub fn lyapunov_w(x: &[f64], chi: f64) -> Result<f64> {
    ensure_positive("chi", chi)?;
    Ok((chi * sand(x)).exp())
}

/// Tracks the time `M_t` during which the walker sits at a (weak) maximum of
/// the tilted local-time profile `L̃(k) = l_k(x_0)/γ + L_t(k)`, and checks
/// `S(X_t) = S(x_0) + γ(−t + (K+1) M_t)` at every jump.
///
/// While the walker is at `i`, only `L̃(i)` grows, so the maximum of `L̃`
/// grows at unit speed exactly when `i` is at the top. Over a segment the
/// walker's value is linear, so the time spent at the top is resolved in
/// closed form.
#[derive(Debug, Clone)]
pub struct SandTracker {
    gamma: f64,
    tilde: Vec<f64>,
    initial_sand: f64,
    at_max: f64,
    pub max_residual: f64,
    /// Largest `M_t / t` seen at a jump.
    pub max_ratio: f64,
}

impl SandTracker {
    pub fn new(initial: &PdmpState, gamma: f64) -> Self {
        let x0 = initial.xs();
        let tilde = Profile::from_increments(&x0, 0.0)
            .levels()
            .iter()
            .map(|l| l / gamma)
            .collect();
        Self {
            gamma,
            tilde,
            initial_sand: sand(&x0),
            at_max: 0.0,
            max_residual: 0.0,
            max_ratio: 0.0,
        }
    }

    pub fn time_at_max(&self) -> f64 {
        self.at_max
    }

    /// `|S(X_t) − S(x_0) − γ(−t + (K+1) M_t)|` for the given state.
    pub fn residual(&self, state: &PdmpState) -> f64 {
        let k = state.edges() as f64;
        let t = state.time();
        let pred = self.initial_sand + self.gamma * (-t + (k + 1.0) * self.at_max);
        (sand(&state.xs()) - pred).abs()
    }

    fn record(&mut self, state: &PdmpState) {
        self.max_residual = self.max_residual.max(self.residual(state));
        let t = state.time();
        if t > 0.0 {
            self.max_ratio = self.max_ratio.max(self.at_max / t);
        }
    }
}

impl Observer for SandTracker {
    fn segment(&mut self, state: &PdmpState, dt: f64, _gamma: f64) {
        if dt <= 0.0 {
            return;
        }
        let i = state.site();
        let others = self
            .tilde
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let v = self.tilde[i];
        self.at_max += if v >= others {
            dt
        } else {
            (dt - (others - v)).max(0.0)
        };
        self.tilde[i] += dt;
    }

    fn jumped(&mut self, state: &PdmpState, _dt: f64, _direction: Direction) {
        self.record(state);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandDrift {
    pub max_residual: f64,
    pub time_at_max: f64,
    /// Largest `M_t / t` over jump times; never above 1.
    pub max_ratio: f64,
}

/// Replays `traj` and returns the largest deviation from the sand identity
/// over all jump times and the horizon.
pub fn sand_drift_check(traj: &Trajectory) -> Result<SandDrift> {
    let mut tracker = SandTracker::new(&traj.initial, traj.params.deposition);
    let end = traj.replay(&mut tracker)?;
    tracker.record(&end);
    Ok(SandDrift {
        max_residual: tracker.max_residual,
        time_at_max: tracker.time_at_max(),
        max_ratio: tracker.max_ratio,
    })
}
