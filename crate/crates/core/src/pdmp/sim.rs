use rand::Rng;

use super::{advance_unchecked, sample_next_event, Landscape, PdmpState, SimParams};
use crate::error::{Error, Result};
use crate::hazard::Direction;
use crate::rng::derive_stream;
use crate::stats::{BatchEstimate, BatchMeans, WeightedSample};

/// Full event logs are kept only below this many jumps.
pub const EVENT_LOG_CAP: usize = 1_000_000;

/// Hooks called while a trajectory is simulated or replayed.
pub trait Observer {
    /// Called with the state at the start of a flow segment of length `dt`.
    fn segment(&mut self, _state: &PdmpState, _dt: f64, _gamma: f64) {}
    /// Called after a jump; `dt` is the flow time that preceded it.
    fn jumped(&mut self, _state: &PdmpState, _dt: f64, _direction: Direction) {}
}

impl Observer for () {}

impl<T: Observer + ?Sized> Observer for &mut T {
    fn segment(&mut self, state: &PdmpState, dt: f64, gamma: f64) {
        (**self).segment(state, dt, gamma)
    }
    fn jumped(&mut self, state: &PdmpState, dt: f64, direction: Direction) {
        (**self).jumped(state, dt, direction)
    }
}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn segment(&mut self, state: &PdmpState, dt: f64, gamma: f64) {
        self.0.segment(state, dt, gamma);
        self.1.segment(state, dt, gamma);
    }
    fn jumped(&mut self, state: &PdmpState, dt: f64, direction: Direction) {
        self.0.jumped(state, dt, direction);
        self.1.jumped(state, dt, direction);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    /// Flow time since the previous event.
    pub dt: f64,
    /// Clock at the jump.
    pub time: f64,
    pub direction: Direction,
    /// Site after the jump.
    pub site: usize,
}

#[derive(Debug, Clone)]
pub struct EventLog {
    events: Vec<JumpEvent>,
    cap: usize,
    overflowed: bool,
}

impl EventLog {
    pub fn with_cap(cap: usize) -> Self {
        Self {
            events: Vec::new(),
            cap,
            overflowed: false,
        }
    }

    pub fn into_events(self) -> Option<Vec<JumpEvent>> {
        (!self.overflowed).then_some(self.events)
    }
}

impl Default for EventLog {
    fn default() -> Self {
        Self::with_cap(EVENT_LOG_CAP)
    }
}

impl Observer for EventLog {
    fn jumped(&mut self, state: &PdmpState, dt: f64, direction: Direction) {
        if self.overflowed {
            return;
        }
        if self.events.len() >= self.cap {
            self.overflowed = true;
            self.events = Vec::new();
            return;
        }
        self.events.push(JumpEvent {
            dt,
            time: state.time(),
            direction,
            site: state.site(),
        });
    }
}

/// Alternates exact event sampling and deterministic flow until the
/// horizon. The last segment is cut at the horizon without a jump.
pub fn simulate<R, O>(mut state: PdmpState, params: &SimParams, rng: &mut R, observer: &mut O) -> PdmpState
where
    R: Rng + ?Sized,
    O: Observer + ?Sized,
{
    let gamma = params.deposition;
    loop {
        let ev = sample_next_event(&state, params, rng);
        let remaining = params.horizon - state.time();
        if ev.dt >= remaining {
            observer.segment(&state, remaining, gamma);
            advance_unchecked(&mut state, remaining, gamma);
            return state;
        }
        observer.segment(&state, ev.dt, gamma);
        advance_unchecked(&mut state, ev.dt, gamma);
        state.jump(ev.direction);
        observer.jumped(&state, ev.dt, ev.direction);
    }
}

/// A simulated path with its (possibly dropped) event log.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub landscape: Landscape,
    pub params: SimParams,
    pub initial: PdmpState,
    pub final_state: PdmpState,
    pub(super) events: Option<Vec<JumpEvent>>,
}

pub fn simulate_logged<R: Rng + ?Sized>(
    landscape: &Landscape,
    init: PdmpState,
    params: &SimParams,
    rng: &mut R,
) -> Trajectory {
    let mut log = EventLog::default();
    let final_state = simulate(init.clone(), params, rng, &mut log);
    Trajectory {
        landscape: landscape.clone(),
        params: *params,
        initial: init,
        final_state,
        events: log.into_events(),
    }
}

impl Trajectory {
    /// Builds a trajectory from an explicit event log, e.g. a handcrafted
    /// path. Jumps must stay inside `0..=K` and end before the horizon.
    pub fn from_events(
        landscape: &Landscape,
        initial: PdmpState,
        params: &SimParams,
        events: Vec<JumpEvent>,
    ) -> Result<Self> {
        let mut traj = Self {
            landscape: landscape.clone(),
            params: *params,
            initial: initial.clone(),
            final_state: initial,
            events: Some(events),
        };
        let mut site = traj.initial.site();
        let mut elapsed = 0.0;
        for ev in traj.events()? {
            if !(ev.dt >= 0.0) {
                return Err(Error::invalid("events", "negative flow time"));
            }
            elapsed += ev.dt;
            site = match ev.direction {
                Direction::Left if site > 0 => site - 1,
                Direction::Right if site < landscape.edges() => site + 1,
                _ => return Err(Error::invalid("events", "jump leaves the segment")),
            };
        }
        if elapsed > params.horizon {
            return Err(Error::invalid("events", "log runs past the horizon"));
        }
        traj.final_state = traj.replay(&mut ())?;
        Ok(traj)
    }

    pub fn events(&self) -> Result<&[JumpEvent]> {
        self.events.as_deref().ok_or(Error::MissingEventLog)
    }

    pub fn horizon(&self) -> f64 {
        self.params.horizon
    }

    /// `M_t(k) = (1/t) ∫_0^t X_s(k) ds`.
    pub fn ergodic_mean_x(&self, edge: usize) -> Result<f64> {
        let t = self.final_state.time();
        if !(t > 0.0) {
            return Err(Error::invalid("t", "ergodic mean needs t > 0"));
        }
        Ok(self.final_state.integral_x(edge) / t)
    }

    /// Re-runs the logged path through `observer`; the result is bitwise
    /// identical to the original final state.
    pub fn replay<O: Observer + ?Sized>(&self, observer: &mut O) -> Result<PdmpState> {
        let events = self.events()?;
        let gamma = self.params.deposition;
        let mut state = self.initial.clone();
        for ev in events {
            observer.segment(&state, ev.dt, gamma);
            advance_unchecked(&mut state, ev.dt, gamma);
            state.jump(ev.direction);
            observer.jumped(&state, ev.dt, ev.direction);
        }
        let remaining = self.params.horizon - state.time();
        observer.segment(&state, remaining, gamma);
        advance_unchecked(&mut state, remaining, gamma);
        Ok(state)
    }

    /// The initial state followed by the state right after every jump.
    pub fn states_at_events(&self) -> Result<Vec<PdmpState>> {
        struct Collect(Vec<PdmpState>);
        impl Observer for Collect {
            fn jumped(&mut self, state: &PdmpState, _: f64, _: Direction) {
                self.0.push(state.clone());
            }
        }
        let mut c = Collect(vec![self.initial.clone()]);
        self.replay(&mut c)?;
        Ok(c.0)
    }
}

/// Time-weighted samples of `X(edge)`. Each flow segment is cut into pieces
/// over which `X(edge)` moves by at most `resolution`; every piece
/// contributes its midpoint weighted by its duration.
#[derive(Debug, Clone)]
pub struct MarginalSampler {
    edge: usize,
    resolution: f64,
    pub sample: WeightedSample,
}

impl MarginalSampler {
    pub fn new(edge: usize, resolution: f64) -> Self {
        Self {
            edge,
            resolution,
            sample: WeightedSample::default(),
        }
    }
}

impl Observer for MarginalSampler {
    fn segment(&mut self, state: &PdmpState, dt: f64, gamma: f64) {
        if dt <= 0.0 {
            return;
        }
        let x0 = state.x(self.edge);
        let x1 = state.x_after(self.edge, dt, gamma);
        let pieces = (((x1 - x0).abs() / self.resolution).ceil() as usize).max(1);
        let h = dt / pieces as f64;
        let dx = (x1 - x0) / pieces as f64;
        for p in 0..pieces {
            self.sample.push(x0 + dx * (p as f64 + 0.5), h);
        }
    }
}

struct ObservableBatches<'a, F> {
    f: &'a F,
    acc: BatchMeans,
    buf: Vec<f64>,
}

impl<F: Fn(&[f64], usize) -> f64> Observer for ObservableBatches<'_, F> {
    fn segment(&mut self, state: &PdmpState, dt: f64, gamma: f64) {
        if dt <= 0.0 {
            return;
        }
        let site = state.site();
        let start = state.xs();
        let vel: Vec<f64> = (1..=state.edges())
            .map(|k| state.x_after(k, 1.0, gamma) - state.x(k))
            .collect();
        let f = self.f;
        let buf = std::cell::RefCell::new(std::mem::take(&mut self.buf));
        self.acc.push_fn(dt, |tau| {
            let mut b = buf.borrow_mut();
            b.clear();
            b.extend(start.iter().zip(&vel).map(|(x, v)| x + v * tau));
            f(&b, site)
        });
        self.buf = buf.into_inner();
    }
}

/// Batch-means estimate of `c_f`, the asymptotic variance of
/// `t^{-1/2} ∫_0^t f(X_s, I_s) ds`. Needs a full event log, at least 16
/// batches and four events per batch.
pub fn clt_variance<F>(traj: &Trajectory, f: F, batches: usize) -> Result<BatchEstimate>
where
    F: Fn(&[f64], usize) -> f64,
{
    if batches < 16 {
        return Err(Error::InsufficientData {
            what: "batches",
            needed: 16,
            got: batches,
        });
    }
    let events = traj.events()?.len();
    if events < 4 * batches {
        return Err(Error::InsufficientData {
            what: "events",
            needed: 4 * batches,
            got: events,
        });
    }
    let mut obs = ObservableBatches {
        f: &f,
        acc: BatchMeans::new(traj.horizon(), batches),
        buf: Vec::new(),
    };
    traj.replay(&mut obs)?;
    Ok(obs.acc.estimate())
}

/// Coupled runs with common random numbers: the process in `landscape`
/// from `(0, site)` and the flat process from `(A', site)`. Their tilts and
/// jump sequences coincide exactly.
pub fn flatten_equivalence(
    landscape: &Landscape,
    site: usize,
    params: &SimParams,
    seed: u64,
) -> Result<(Trajectory, Trajectory)> {
    let flat = Landscape::flat(landscape.edges());
    let a = PdmpState::at_rest(site, landscape)?;
    let b = PdmpState::new(landscape.increments(), site, &flat)?;
    let ta = simulate_logged(landscape, a, params, &mut derive_stream(seed, 0));
    let tb = simulate_logged(&flat, b, params, &mut derive_stream(seed, 0));
    Ok((ta, tb))
}

/// Coupled runs at `(A, β, γ)` from `x0` and at `(A/γ, βγ, 1)` from
/// `x0/γ`. The second path is the first with edge values divided by `γ`.
pub fn gamma_rescale_equivalence(
    landscape: &Landscape,
    x0: &[f64],
    site: usize,
    params: &SimParams,
    seed: u64,
) -> Result<(Trajectory, Trajectory)> {
    let g = params.deposition;
    let scaled = landscape.scaled(1.0 / g);
    let unit = SimParams::new(params.inv_temp * g, 1.0, params.horizon)?;
    let a = PdmpState::new(x0, site, landscape)?;
    let y0: Vec<f64> = x0.iter().map(|x| x / g).collect();
    let b = PdmpState::new(&y0, site, &scaled)?;
    let ta = simulate_logged(landscape, a, params, &mut derive_stream(seed, 0));
    let tb = simulate_logged(&scaled, b, &unit, &mut derive_stream(seed, 0));
    Ok((ta, tb))
}
