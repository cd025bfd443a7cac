use rand::Rng;

use super::{EtaProcess, EtaStart};
use crate::error::{ensure_positive, Error, Result};
use crate::hazard::Direction;
use crate::pdmp::{advance_unchecked, sample_next_event, Landscape, PdmpState, SimParams, Trajectory};

/// Local times at the inverse local time `T_{j,r}`, the first time the
/// walker has spent `r` at site `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeProfile {
    pub anchor: usize,
    pub target: f64,
    pub values: Vec<f64>,
}

impl LocalTimeProfile {
    /// `T_{j,r} = Σ_k Λ(k)`.
    pub fn total_time(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn check_target(state: &PdmpState, anchor: usize, target: f64) -> Result<()> {
    if anchor > state.edges() {
        return Err(Error::invalid("j", format!("must be a site in 0..={}", state.edges())));
    }
    ensure_positive("r", target)
}

fn stop_at(state: &mut PdmpState, anchor: usize, target: f64, gamma: f64) -> LocalTimeProfile {
    let rest = target - state.local_times()[anchor];
    advance_unchecked(state, rest, gamma);
    let mut values = state.local_times().to_vec();
    // the subtraction above can leave an ulp of slack
    values[anchor] = target;
    LocalTimeProfile {
        anchor,
        target,
        values,
    }
}

/// Replays `traj` and stops it at `T_{j,r}`.
pub fn direct_profile(traj: &Trajectory, anchor: usize, target: f64) -> Result<LocalTimeProfile> {
    let mut state = traj.initial.clone();
    check_target(&state, anchor, target)?;
    let gamma = traj.params.deposition;
    for ev in traj.events()? {
        if state.site() == anchor && state.local_times()[anchor] + ev.dt >= target {
            return Ok(stop_at(&mut state, anchor, target, gamma));
        }
        advance_unchecked(&mut state, ev.dt, gamma);
        state.jump(ev.direction);
    }
    let rest = traj.horizon() - state.time();
    if state.site() == anchor && state.local_times()[anchor] + rest >= target {
        return Ok(stop_at(&mut state, anchor, target, gamma));
    }
    Err(Error::TargetNotReached {
        site: anchor,
        target,
    })
}

/// Simulates from `init` until the local time at `anchor` reaches `target`.
pub fn simulate_to_local_time<R: Rng + ?Sized>(
    init: PdmpState,
    params: &SimParams,
    anchor: usize,
    target: f64,
    rng: &mut R,
) -> Result<LocalTimeProfile> {
    let mut state = init;
    check_target(&state, anchor, target)?;
    let gamma = params.deposition;
    loop {
        let ev = sample_next_event(&state, params, rng);
        if state.site() == anchor && state.local_times()[anchor] + ev.dt >= target {
            return Ok(stop_at(&mut state, anchor, target, gamma));
        }
        advance_unchecked(&mut state, ev.dt, gamma);
        state.jump(ev.direction);
    }
}

/// A stretch of `η⁻_k` between two upward jumps: starts at local clock
/// `start` with value `value` and decreases at speed `γ` for `duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSegment {
    pub start: f64,
    pub value: f64,
    pub duration: f64,
}

/// `η⁻_k(s) = X_{θ_s}(k)` where `θ` inverts the clock `s = L_t(k−1)`:
/// the path of `X(k)` with the time spent away from `k−1` cut out. Each
/// excursion to the right collapses into an upward jump.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaPath {
    pub gamma: f64,
    pub segments: Vec<EtaSegment>,
}

impl EtaPath {
    /// Total local clock, `L_t(k−1)` at the end of the trajectory.
    pub fn duration(&self) -> f64 {
        self.segments.last().map_or(0.0, |g| g.start + g.duration)
    }

    /// Right-continuous value at clock `s`; `None` before the walker first
    /// reaches `k−1` or beyond the recorded clock.
    pub fn value_at(&self, s: f64) -> Option<f64> {
        if s > self.duration() {
            return None;
        }
        let idx = self.segments.partition_point(|g| g.start <= s);
        let g = self.segments.get(idx.checked_sub(1)?)?;
        Some(g.value - self.gamma * (s - g.start))
    }
}

/// Extracts `η⁻_k` from a logged trajectory.
pub fn extract_eta_minus(traj: &Trajectory, edge: usize) -> Result<EtaPath> {
    let k = traj.initial.edges();
    if edge == 0 || edge > k {
        return Err(Error::invalid("k", format!("must be an edge in 1..={k}")));
    }
    let events = traj.events()?;
    let gamma = traj.params.deposition;
    let below = edge - 1;
    let mut state = traj.initial.clone();
    let mut segments: Vec<EtaSegment> = Vec::new();
    let mut open = false;
    let flow = |state: &mut PdmpState, dt: f64, segments: &mut Vec<EtaSegment>, open: &mut bool| {
        if state.site() == below {
            if !*open {
                segments.push(EtaSegment {
                    start: state.local_times()[below],
                    value: state.x(edge),
                    duration: 0.0,
                });
                *open = true;
            }
            segments.last_mut().expect("open segment").duration += dt;
        }
        advance_unchecked(state, dt, gamma);
    };
    for ev in events {
        flow(&mut state, ev.dt, &mut segments, &mut open);
        let from = state.site();
        state.jump(ev.direction);
        // only a return from `edge` carries an upward jump of η⁻
        if from == edge && ev.direction == Direction::Left {
            open = false;
        }
    }
    let rest = traj.horizon() - state.time();
    flow(&mut state, rest, &mut segments, &mut open);
    Ok(EtaPath { gamma, segments })
}

/// Builds `Λ_{j,r}` by the Ray-Knight walk: `Λ(j) = r`, then
/// `Λ(k) = Λ(k−1) + η⁻_k(Λ(k−1)) − x0(k)` to the right and
/// `Λ(k−1) = Λ(k) + η⁺_k(Λ(k)) + x0(k)` to the left, with independent `η`
/// processes started from their Ray-Knight initial laws. Valid for the flat
/// landscape with `γ = 1`.
pub fn rk_walk_profile<R: Rng + ?Sized>(
    x0: &[f64],
    i0: usize,
    anchor: usize,
    target: f64,
    beta: f64,
    rng: &mut R,
) -> Result<LocalTimeProfile> {
    let kmax = x0.len();
    if anchor > kmax || i0 > kmax {
        return Err(Error::invalid("j", format!("sites must lie in 0..={kmax}")));
    }
    ensure_positive("r", target)?;
    ensure_positive("beta", beta)?;
    let mut values = vec![0.0; kmax + 1];
    values[anchor] = target;
    let run = |start: EtaStart, clock: f64, rng: &mut R| {
        let mut eta = EtaProcess::new(start.draw(beta, rng), beta);
        eta.run_to(clock, rng);
        eta.y
    };
    let settle = |v: f64, site: usize, scale: f64| {
        if v >= 0.0 {
            Ok(v)
        } else if v > -1e-9 * scale.max(1.0) {
            Ok(0.0)
        } else {
            Err(Error::NegativeLocalTime { site, value: v })
        }
    };
    for k in anchor + 1..=kmax {
        let prev = values[k - 1];
        let eta = run(EtaStart::minus(k, i0, x0[k - 1]), prev, rng);
        values[k] = settle(prev + eta - x0[k - 1], k, prev)?;
    }
    for k in (1..=anchor).rev() {
        let cur = values[k];
        let eta = run(EtaStart::plus(k, i0, x0[k - 1]), cur, rng);
        values[k - 1] = settle(cur + eta + x0[k - 1], k - 1, cur)?;
    }
    Ok(LocalTimeProfile {
        anchor,
        target,
        values,
    })
}

/// Direct oracle for [`rk_walk_profile`]: the flat unit-rate walk from
/// `(x0, i0)` stopped at `T_{j,r}`.
pub fn direct_profile_sim<R: Rng + ?Sized>(
    x0: &[f64],
    i0: usize,
    anchor: usize,
    target: f64,
    beta: f64,
    rng: &mut R,
) -> Result<LocalTimeProfile> {
    let land = Landscape::flat(x0.len());
    let params = SimParams::new(beta, 1.0, f64::MAX)?;
    simulate_to_local_time(PdmpState::new(x0, i0, &land)?, &params, anchor, target, rng)
}
