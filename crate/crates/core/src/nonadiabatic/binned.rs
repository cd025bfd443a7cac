//! Discrete metadynamics with the bias shared across bins of sites.
//!
//! A map `ξ: {0..K} → {0..B}` groups sites into bins and only the bin local
//! times `L(b)` are penalised. The walker jumps right from `k` at rate
//! `exp(−β(γ[L(ξ(k+1)) − L(ξ(k))] + V'_{k+1}))` and left at rate
//! `exp(β(γ[L(ξ(k)) − L(ξ(k−1))] + V'_k))`. Each hazard either grows like
//! `e^{βγs}` (the neighbour lies in another bin) or stays constant, so event
//! times are inverted in closed form as for the site-by-site walk.
//!
//! Edge quantities are stored as tilts `γ[L(ξ(k)) − L(ξ(k−1))] + V'_k`, in
//! the same layout and with the same arithmetic as [`crate::pdmp`]: with one
//! site per bin both simulators produce identical paths from one stream.

use rand::Rng;

use crate::error::{ensure_positive, Error, Result};
use crate::hazard::{sample_competing, sample_shared_envelope, Direction};
use crate::stats::{BatchEstimate, BatchMeans};

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedModel {
    bins: Vec<usize>,
    potential: Vec<f64>,
    inv_temp: f64,
    deposition: f64,
}

impl BinnedModel {
    /// `bins[k] = ξ(k)` must hit every label `0..=B`; `potential[k] = V_k`.
    pub fn new(bins: Vec<usize>, potential: Vec<f64>, inv_temp: f64, deposition: f64) -> Result<Self> {
        if bins.len() < 2 || bins.len() != potential.len() {
            return Err(Error::invalid(
                "bins",
                format!(
                    "need at least two sites and one potential value per site, got {} bins and {} values",
                    bins.len(),
                    potential.len()
                ),
            ));
        }
        let labels = bins.iter().max().unwrap() + 1;
        let mut hit = vec![false; labels];
        for &b in &bins {
            hit[b] = true;
        }
        if let Some(b) = hit.iter().position(|h| !h) {
            return Err(Error::invalid("bins", format!("label {b} is not used by any site")));
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("potential", "must be finite"));
        }
        ensure_positive("beta", inv_temp)?;
        ensure_positive("gamma", deposition)?;
        Ok(Self {
            bins,
            potential,
            inv_temp,
            deposition,
        })
    }

    pub fn sites(&self) -> usize {
        self.bins.len()
    }

    pub fn edges(&self) -> usize {
        self.bins.len() - 1
    }

    pub fn bin_count(&self) -> usize {
        self.bins.iter().max().unwrap() + 1
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn inv_temp(&self) -> f64 {
        self.inv_temp
    }

    pub fn deposition(&self) -> f64 {
        self.deposition
    }

    /// `V'_k = V_k − V_{k−1}` for `k = 1..K`.
    pub fn increments(&self) -> Vec<f64> {
        self.potential.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `A_b = −(2β)^{-1} ln π(ξ^{-1}(b))` for the law `π ∝ e^{−2βV}`, shifted
    /// so that the smallest is zero.
    pub fn bin_free_energies(&self) -> Vec<f64> {
        let b2 = 2.0 * self.inv_temp;
        let vmin = self.potential.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut mass = vec![0.0; self.bin_count()];
        for (&b, &v) in self.bins.iter().zip(&self.potential) {
            mass[b] += (-b2 * (v - vmin)).exp();
        }
        let a: Vec<f64> = mass.iter().map(|m| -m.ln() / b2).collect();
        let amin = a.iter().cloned().fold(f64::INFINITY, f64::min);
        a.into_iter().map(|x| x - amin).collect()
    }

    /// `±1` if the edge between `e` and `e + 1` moves while the walker is in
    /// bin `b`, else `0`.
    fn edge_sign(&self, e: usize, b: usize) -> i8 {
        let (lo, hi) = (self.bins[e] == b, self.bins[e + 1] == b);
        match (lo, hi) {
            (false, true) => 1,
            (true, false) => -1,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedState {
    tilt: Vec<f64>,
    shift: Vec<f64>,
    site: usize,
    time: f64,
    bin_local: Vec<f64>,
    tilt_integral: Vec<f64>,
}

impl BinnedState {
    /// Zero local times, walker at `site`.
    pub fn at_rest(model: &BinnedModel, site: usize) -> Result<Self> {
        if site >= model.sites() {
            return Err(Error::invalid("site", format!("must be below {}, got {site}", model.sites())));
        }
        let shift = model.increments();
        Ok(Self {
            tilt: shift.clone(),
            shift,
            site,
            time: 0.0,
            bin_local: vec![0.0; model.bin_count()],
            tilt_integral: vec![0.0; model.edges()],
        })
    }

    pub fn site(&self) -> usize {
        self.site
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn bin_local_times(&self) -> &[f64] {
        &self.bin_local
    }

    pub fn tilts(&self) -> &[f64] {
        &self.tilt
    }

    /// `γ[L(ξ(k)) − L(ξ(k−1))]` for the 1-based edge `k`.
    pub fn x(&self, edge: usize) -> f64 {
        self.tilt[edge - 1] - self.shift[edge - 1]
    }

    /// `∫_0^t` of [`Self::x`].
    pub fn integral_x(&self, edge: usize) -> f64 {
        self.tilt_integral[edge - 1] - self.shift[edge - 1] * self.time
    }

    fn advance(&mut self, model: &BinnedModel, dt: f64) {
        if dt == 0.0 {
            return;
        }
        let gamma = model.deposition;
        let b = model.bins[self.site];
        for (v, acc) in self.tilt.iter().zip(self.tilt_integral.iter_mut()) {
            *acc += v * dt;
        }
        let half = 0.5 * gamma * dt * dt;
        for e in 0..self.tilt.len() {
            match model.edge_sign(e, b) {
                1 => {
                    self.tilt_integral[e] += half;
                    self.tilt[e] += gamma * dt;
                }
                -1 => {
                    self.tilt_integral[e] -= half;
                    self.tilt[e] -= gamma * dt;
                }
                _ => {}
            }
        }
        self.bin_local[b] += dt;
        self.time += dt;
    }
}

/// Samples the next jump. With a common envelope (or a single active side)
/// the draw sequence matches the site-by-site walk exactly.
fn next_event<R: Rng + ?Sized>(model: &BinnedModel, state: &BinnedState, rng: &mut R) -> (f64, Direction) {
    let i = state.site;
    let beta = model.inv_temp;
    let growth = beta * model.deposition;
    let b = model.bins[i];
    let left = (i > 0).then(|| {
        let g = if model.edge_sign(i - 1, b) != 0 { growth } else { 0.0 };
        (beta * state.tilt[i - 1], g)
    });
    let right = (i < model.edges()).then(|| {
        let g = if model.edge_sign(i, b) != 0 { growth } else { 0.0 };
        (-beta * state.tilt[i], g)
    });
    match (left, right) {
        (Some((l, gl)), Some((r, gr))) if gl == gr => sample_shared_envelope(Some(l), Some(r), gl, rng),
        (Some((l, gl)), None) => sample_shared_envelope(Some(l), None, gl, rng),
        (None, Some((r, gr))) => sample_shared_envelope(None, Some(r), gr, rng),
        (l, r) => sample_competing(l, r, rng),
    }
}

/// Exact simulation from `state` for `horizon` more time units.
/// `on_segment(state, dt)` sees every flow piece before it is applied.
pub fn binned_simulate<R, F>(
    model: &BinnedModel,
    mut state: BinnedState,
    horizon: f64,
    rng: &mut R,
    mut on_segment: F,
) -> Result<BinnedState>
where
    R: Rng + ?Sized,
    F: FnMut(&BinnedState, f64),
{
    ensure_positive("horizon", horizon)?;
    let end = state.time + horizon;
    loop {
        let (dt, dir) = next_event(model, &state, rng);
        let remaining = end - state.time;
        if dt >= remaining {
            on_segment(&state, remaining);
            state.advance(model, remaining);
            return Ok(state);
        }
        on_segment(&state, dt);
        state.advance(model, dt);
        match dir {
            Direction::Left => state.site -= 1,
            Direction::Right => state.site += 1,
        }
    }
}

/// Sites `0..3` with wells at `0` and `3` and a flat saddle `{1, 2}`;
/// bins `− = {0, 1}` and `+ = {2, 3}`.
pub fn four_state_model(v: [f64; 4], inv_temp: f64, deposition: f64) -> Result<BinnedModel> {
    BinnedModel::new(vec![0, 0, 1, 1], v.to_vec(), inv_temp, deposition)
}

/// Ergodic statistics of `X_t = γ(L(+) − L(−))` in a four-state run.
#[derive(Debug, Clone)]
pub struct FourStateSummary {
    pub estimate: BatchEstimate,
    /// `γ(1/λ_+ − 1/λ_−)` with `λ_± = e^{−βD_±}`.
    pub heuristic: f64,
    /// `A_− − A_+ = (2β)^{-1} ln((1 + λ_+^{-2})/(1 + λ_−^{-2}))`.
    pub fe_diff: f64,
    pub final_state: BinnedState,
}

impl FourStateSummary {
    /// `D_− = V_1 − V_0` and `D_+ = V_2 − V_3`.
    pub fn barriers(v: [f64; 4]) -> (f64, f64) {
        (v[1] - v[0], v[2] - v[3])
    }

    pub fn heuristic_mean(v: [f64; 4], inv_temp: f64, deposition: f64) -> f64 {
        let (dm, dp) = Self::barriers(v);
        deposition * ((inv_temp * dp).exp() - (inv_temp * dm).exp())
    }

    pub fn free_energy_gap(v: [f64; 4], inv_temp: f64) -> f64 {
        let (dm, dp) = Self::barriers(v);
        let (lp, lm) = ((-inv_temp * dp).exp(), (-inv_temp * dm).exp());
        ((1.0 + lp.powi(-2)) / (1.0 + lm.powi(-2))).ln() / (2.0 * inv_temp)
    }

    /// Runs the four-state model from site 0 with `X_0 = 0` and batch means
    /// of `X` over `batches` blocks. `on_segment` sees each piece of `X`.
    pub fn run<R, F>(
        v: [f64; 4],
        inv_temp: f64,
        deposition: f64,
        horizon: f64,
        batches: usize,
        rng: &mut R,
        mut on_segment: F,
    ) -> Result<Self>
    where
        R: Rng + ?Sized,
        F: FnMut(&BinnedState, f64),
    {
        let model = four_state_model(v, inv_temp, deposition)?;
        let init = BinnedState::at_rest(&model, 0)?;
        let mut bm = BatchMeans::new(horizon, batches.max(2));
        let final_state = binned_simulate(&model, init, horizon, rng, |s, dt| {
            // X is the edge between the bins; it moves up in + and down in −
            let slope = if model.bins[s.site] == 1 { deposition } else { -deposition };
            bm.push_linear(s.x(2), slope, dt);
            on_segment(s, dt);
        })?;
        Ok(Self {
            estimate: bm.estimate(),
            heuristic: Self::heuristic_mean(v, inv_temp, deposition),
            fe_diff: Self::free_energy_gap(v, inv_temp),
            final_state,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdmp::{simulate, Landscape, Observer, PdmpState, SimParams};
    use crate::rng::derive_stream;

    const V: [f64; 4] = [0.0, 2.0, 2.0, 0.5];

    #[test]
    fn rejects_gaps_in_labels() {
        assert!(BinnedModel::new(vec![0, 2, 2], vec![0.0; 3], 1.0, 1.0).is_err());
        assert!(BinnedModel::new(vec![0, 1], vec![0.0; 3], 1.0, 1.0).is_err());
        assert!(BinnedModel::new(vec![0, 1], vec![0.0; 2], 1.0, -1.0).is_err());
    }

    #[derive(Default)]
    struct Segments(Vec<(f64, usize, f64, Vec<f64>)>);

    impl Observer for Segments {
        fn segment(&mut self, state: &PdmpState, dt: f64, _gamma: f64) {
            self.0.push((state.time(), state.site(), dt, state.tilts().to_vec()));
        }
    }

    #[test]
    fn identity_bins_reproduce_the_site_walk() {
        for (v, gamma, beta) in [
            (vec![0.0, 0.0, 0.0], 1.0, 1.0),
            (vec![0.0, 1.0, 1.0, 0.0], 0.7, 1.3),
            (vec![0.5, -0.2, 0.3, 1.0, 0.0], 2.0, 0.5),
        ] {
            let k = v.len() - 1;
            let model = BinnedModel::new((0..=k).collect(), v.clone(), beta, gamma).unwrap();
            let landscape = Landscape::new(v.clone()).unwrap();
            let params = SimParams::new(beta, gamma, 2_000.0).unwrap();
            let mut seg = Segments::default();
            let pd = simulate(PdmpState::at_rest(1, &landscape).unwrap(), &params, &mut derive_stream(5, 0), &mut seg);
            let mut mine = Vec::new();
            let bn = binned_simulate(
                &model,
                BinnedState::at_rest(&model, 1).unwrap(),
                2_000.0,
                &mut derive_stream(5, 0),
                |s, dt| mine.push((s.time(), s.site(), dt, s.tilts().to_vec())),
            )
            .unwrap();
            assert!(seg.0.len() > 100);
            assert_eq!(seg.0, mine);
            assert_eq!(pd.tilts(), bn.tilts());
            for e in 1..=k {
                assert_eq!(pd.integral_x(e), bn.integral_x(e));
            }
            assert_eq!(pd.local_times(), bn.bin_local_times());
        }
    }

    #[test]
    fn inner_edges_stay_put() {
        let model = four_state_model(V, 1.0, 1.0).unwrap();
        let s = binned_simulate(&model, BinnedState::at_rest(&model, 0).unwrap(), 500.0, &mut derive_stream(6, 0), |_, _| {}).unwrap();
        assert_eq!(s.x(1), 0.0);
        assert_eq!(s.x(3), 0.0);
        let l = s.bin_local_times();
        assert!((s.x(2) - (l[1] - l[0])).abs() < 1e-9);
        assert!((l[0] + l[1] - 500.0).abs() < 1e-9);
    }

    #[test]
    fn closed_forms() {
        let h = FourStateSummary::heuristic_mean(V, 1.0, 1.0);
        assert!((h - (1.5f64.exp() - 2f64.exp())).abs() < 1e-12);
        assert!((h + 2.9074).abs() < 1e-4);
        let fe = FourStateSummary::free_energy_gap(V, 1.0);
        assert!((fe + 0.4848).abs() < 1e-4);
        let model = four_state_model(V, 1.0, 1.0).unwrap();
        let a = model.bin_free_energies();
        assert!(((a[0] - a[1]) - fe).abs() < 1e-12);
    }

    #[test]
    fn large_gamma_follows_the_cycle_picture() {
        let mut rng = derive_stream(7, 0);
        let s = FourStateSummary::run(V, 1.0, 5.0, 1e5, 32, &mut rng, |_, _| {}).unwrap();
        let rel = (s.estimate.mean - s.heuristic) / s.heuristic;
        assert!(rel.abs() < 0.15, "{} vs {}", s.estimate.mean, s.heuristic);
    }

    #[test]
    fn batch_mean_equals_the_edge_integral() {
        let mut rng = derive_stream(8, 0);
        let s = FourStateSummary::run(V, 1.0, 1.0, 1_000.0, 16, &mut rng, |_, _| {}).unwrap();
        let direct = s.final_state.integral_x(2) / 1_000.0;
        assert!((s.estimate.mean - direct).abs() < 1e-9 * (1.0 + direct.abs()));
    }
}
