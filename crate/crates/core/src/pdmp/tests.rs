use super::*;
use crate::hazard::invert_exp_hazard;
use crate::rng::{derive_stream, run_replicas};
use crate::stats::{ks_one_sample, ks_two_sample, mean_var, WeightedSample};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

fn params(beta: f64, gamma: f64, horizon: f64) -> SimParams {
    SimParams::new(beta, gamma, horizon).unwrap()
}

#[test]
fn rates_on_flat_interior_site_are_one() {
    let land = Landscape::flat(3);
    let s = PdmpState::at_rest(1, &land).unwrap();
    assert_eq!(jump_rates(&s, &params(1.0, 1.0, 1.0)), (Some(1.0), Some(1.0)));
}

#[test]
fn no_left_rate_at_origin_and_no_right_rate_at_end() {
    let land = Landscape::flat(2);
    let p = params(1.0, 1.0, 1.0);
    assert_eq!(jump_rates(&PdmpState::at_rest(0, &land).unwrap(), &p).0, None);
    assert_eq!(jump_rates(&PdmpState::at_rest(2, &land).unwrap(), &p).1, None);
}

#[test]
fn left_rate_reads_the_tilt() {
    let land = Landscape::flat(2);
    let s = PdmpState::new(&[2f64.ln(), 0.0], 1, &land).unwrap();
    let (l, _) = jump_rates(&s, &params(1.0, 1.0, 1.0));
    assert!((l.unwrap() - 2.0).abs() < 1e-15);

    let land = Landscape::new(vec![0.0, 0.5, 0.0]).unwrap();
    let s = PdmpState::new(&[-0.5, 0.0], 1, &land).unwrap();
    let (l, r) = jump_rates(&s, &params(2.0, 1.0, 1.0));
    assert_eq!(l, Some(1.0));
    assert!((r.unwrap() - 1.0f64.exp()).abs() < 1e-14);
}

#[test]
fn two_unit_rates_invert_at_one() {
    let land = Landscape::flat(2);
    let s = PdmpState::at_rest(1, &land).unwrap();
    let (l, r) = log_jump_rates(&s, &params(1.0, 1.0, 1.0));
    let total = crate::hazard::log_add_exp(l.unwrap(), r.unwrap());
    let dt = invert_exp_hazard(total, 1.0, 2.0 * (std::f64::consts::E - 1.0));
    assert!((dt - 1.0).abs() < 1e-14);
}

#[test]
fn boundary_site_always_jumps_inward() {
    let land = Landscape::flat(2);
    let p = params(1.0, 1.0, 1.0);
    let mut rng = derive_stream(1, 0);
    let s = PdmpState::at_rest(0, &land).unwrap();
    for _ in 0..1000 {
        assert_eq!(sample_next_event(&s, &p, &mut rng).direction, Direction::Right);
    }
}

#[test]
fn symmetric_site_splits_evenly() {
    let land = Landscape::flat(2);
    let p = params(1.0, 1.0, 1.0);
    let mut rng = derive_stream(2, 0);
    let s = PdmpState::at_rest(1, &land).unwrap();
    let n = 100_000;
    let left = (0..n)
        .filter(|_| sample_next_event(&s, &p, &mut rng).direction == Direction::Left)
        .count();
    let frac = left as f64 / n as f64;
    assert!((frac - 0.5).abs() < 0.005, "{frac}");
}

/// Independent sampler: Ogata thinning of the two hazards, each evaluated
/// from the state's tilts by a small forward window.
fn thinning_event<R: Rng>(state: &PdmpState, p: &SimParams, rng: &mut R) -> (f64, Direction) {
    let (b, g) = (p.inv_temp, p.deposition);
    let i = state.site();
    let k = state.edges();
    let rate = |s: f64| {
        let l = if i > 0 { (b * (state.tilt(i) + g * s)).exp() } else { 0.0 };
        let r = if i < k { (-b * (state.tilt(i + 1) - g * s)).exp() } else { 0.0 };
        (l, r)
    };
    let window = 0.25;
    let mut s = 0.0;
    loop {
        let (l, r) = rate(s + window);
        let bound = l + r;
        let e: f64 = Exp1.sample(rng);
        let cand = s + e / bound;
        if cand > s + window {
            s += window;
            continue;
        }
        s = cand;
        let (l, r) = rate(s);
        let u: f64 = rng.random::<f64>() * bound;
        if u < l {
            return (s, Direction::Left);
        }
        if u < l + r {
            return (s, Direction::Right);
        }
    }
}

#[test]
fn exact_sampler_agrees_with_thinning() {
    let land = Landscape::new(vec![0.0, 0.3, -0.2, 0.4]).unwrap();
    let p = params(1.3, 0.7, 1.0);
    let s = PdmpState::new(&[0.4, -0.6, 0.1], 2, &land).unwrap();
    let mut rng = derive_stream(3, 0);
    let n = 40_000;
    let mut exact = Vec::with_capacity(n);
    let mut thin = Vec::with_capacity(n);
    let (mut el, mut tl) = (0, 0);
    for _ in 0..n {
        let ev = sample_next_event(&s, &p, &mut rng);
        exact.push(ev.dt);
        el += (ev.direction == Direction::Left) as usize;
        let (dt, dir) = thinning_event(&s, &p, &mut rng);
        thin.push(dt);
        tl += (dir == Direction::Left) as usize;
    }
    let ks = ks_two_sample(
        &WeightedSample::unweighted(exact),
        &WeightedSample::unweighted(thin),
    )
    .unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
    let (pe, pt) = (el as f64 / n as f64, tl as f64 / n as f64);
    assert!((pe - pt).abs() < 0.015, "{pe} vs {pt}");
}

#[test]
fn advance_examples() {
    let land = Landscape::flat(3);
    let p = params(1.0, 1.0, 10.0);
    let mut s = PdmpState::new(&[0.5, -0.25, 1.0], 1, &land).unwrap();
    let before = s.clone();
    advance(&mut s, 0.0, &p).unwrap();
    assert_eq!(s, before);
    advance(&mut s, 2.0, &p).unwrap();
    assert_eq!(s.xs(), vec![2.5, -2.25, 1.0]);
    assert_eq!(s.local_times(), &[0.0, 2.0, 0.0, 0.0]);
    // trapezoids: 2(0.5 + 1), 2(−0.25 − 1), 2·1
    assert!((s.integral_x(1) - 3.0).abs() < 1e-15);
    assert!((s.integral_x(2) + 2.5).abs() < 1e-15);
    assert!((s.integral_x(3) - 2.0).abs() < 1e-15);
    assert!(advance(&mut s, -1.0, &p).is_err());
}

#[test]
fn integral_in_a_tilted_landscape_is_exact() {
    let land = Landscape::new(vec![0.0, 1.0, 3.0]).unwrap();
    let p = params(1.0, 0.5, 10.0);
    let mut s = PdmpState::new(&[0.2, -0.4], 0, &land).unwrap();
    advance(&mut s, 4.0, &p).unwrap();
    // at site 0 only edge 1 moves, downward at speed 0.5
    assert!((s.x(1) - (0.2 - 2.0)).abs() < 1e-14);
    assert!((s.integral_x(1) - 4.0 * (0.2 - 1.0)).abs() < 1e-13);
    assert!((s.integral_x(2) - 4.0 * -0.4).abs() < 1e-13);
}

#[test]
fn tiny_horizon_has_no_jumps() {
    let land = Landscape::flat(2);
    let p = params(1.0, 1.0, 1e-12);
    let t = simulate_logged(&land, PdmpState::at_rest(1, &land).unwrap(), &p, &mut derive_stream(0, 0));
    assert!(t.events().unwrap().is_empty());
    assert!(t.final_state.xs().iter().all(|x| x.abs() < 1e-11));
}

fn check_bookkeeping(traj: &Trajectory) {
    let g = traj.params.deposition;
    let x0 = traj.initial.xs();
    let k = traj.initial.edges();
    for s in traj.states_at_events().unwrap() {
        let t = s.time();
        let l = s.local_times();
        for e in 1..=k {
            let pred = x0[e - 1] + g * (l[e] - l[e - 1]);
            assert!((s.x(e) - pred).abs() <= 1e-9 * t.max(1.0), "edge {e} at t={t}");
            assert!(s.x(e).abs() <= x0[e - 1].abs() + g * t + 1e-9 * t.max(1.0));
        }
        let sum: f64 = l.iter().sum();
        assert!((sum - t).abs() <= 1e-9 * t.max(1.0));
    }
}

#[test]
fn bookkeeping_identity_along_a_run() {
    let land = Landscape::new(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let p = params(1.0, 1.5, 2000.0);
    let init = PdmpState::new(&[0.3, 0.0, -1.0], 2, &land).unwrap();
    let traj = simulate_logged(&land, init, &p, &mut derive_stream(5, 0));
    assert!(traj.events().unwrap().len() > 100);
    check_bookkeeping(&traj);
}

#[test]
fn replay_reproduces_the_final_state_bitwise() {
    let land = Landscape::new(vec![0.0, -0.5, 0.7]).unwrap();
    let p = params(0.8, 1.2, 500.0);
    let traj = simulate_logged(&land, PdmpState::at_rest(0, &land).unwrap(), &p, &mut derive_stream(6, 0));
    let again = traj.replay(&mut ()).unwrap();
    assert_eq!(again, traj.final_state);
    assert_eq!(again.time(), 500.0);
}

#[test]
fn overflowing_log_is_dropped() {
    let land = Landscape::flat(1);
    let p = params(1.0, 1.0, 1000.0);
    let mut log = EventLog::with_cap(10);
    simulate(PdmpState::at_rest(0, &land).unwrap(), &p, &mut derive_stream(0, 0), &mut log);
    assert!(log.into_events().is_none());
}

#[test]
fn ergodic_mean_rejects_zero_time() {
    let land = Landscape::flat(1);
    let s = PdmpState::at_rest(0, &land).unwrap();
    let traj = Trajectory {
        landscape: land,
        params: params(1.0, 1.0, 1.0),
        initial: s.clone(),
        final_state: s,
        events: Some(vec![]),
    };
    assert!(traj.ergodic_mean_x(1).is_err());
}

#[test]
fn k1_occupation_and_mean_on_flat_landscape() {
    let land = Landscape::flat(1);
    let p = params(1.0, 1.0, 1e5);
    let traj = simulate_logged(&land, PdmpState::at_rest(0, &land).unwrap(), &p, &mut derive_stream(7, 0));
    let frac = traj.final_state.local_times()[0] / 1e5;
    assert!((frac - 0.5).abs() < 0.01, "{frac}");
    assert!(traj.ergodic_mean_x(1).unwrap().abs() < 0.02);
}

#[test]
fn tilted_landscape_learns_minus_increment() {
    let land = Landscape::new(vec![0.0, 1.0]).unwrap();
    let p = params(1.0, 1.0, 1e5);
    let traj = simulate_logged(&land, PdmpState::at_rest(0, &land).unwrap(), &p, &mut derive_stream(8, 0));
    let m = traj.ergodic_mean_x(1).unwrap();
    assert!((m + 1.0).abs() < 0.03, "{m}");
}

#[test]
fn flat_landscape_flattening_is_bitwise_identity() {
    let land = Landscape::flat(3);
    let (a, b) = flatten_equivalence(&land, 1, &params(1.0, 1.0, 300.0), 9).unwrap();
    assert_eq!(a.final_state, b.final_state);
    assert_eq!(a.events().unwrap(), b.events().unwrap());
}

fn assert_tilts_coupled(a: &Trajectory, b: &Trajectory, scale: f64, tol: f64) {
    let ea = a.events().unwrap();
    let eb = b.events().unwrap();
    assert_eq!(ea.len(), eb.len());
    for (x, y) in ea.iter().zip(eb) {
        assert_eq!(x.direction, y.direction);
        assert_eq!(x.site, y.site);
        assert!((x.time - y.time).abs() <= tol * x.time.max(1.0));
    }
    for (sa, sb) in a.states_at_events().unwrap().iter().zip(b.states_at_events().unwrap()) {
        for k in 1..=sa.edges() {
            let d = (sa.tilt(k) / scale - sb.tilt(k)).abs();
            assert!(d <= tol * sa.time().max(1.0), "edge {k}: {d}");
        }
    }
}

#[test]
fn flatten_coupling_is_exact() {
    let land = Landscape::new(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let (a, b) = flatten_equivalence(&land, 0, &params(1.0, 1.0, 1000.0), 10).unwrap();
    assert_tilts_coupled(&a, &b, 1.0, 0.0);
}

#[test]
fn gamma_rescale_is_exact_for_powers_of_two() {
    let land = Landscape::new(vec![0.0, 0.7, -0.3, 0.2]).unwrap();
    for g in [0.5, 1.0, 2.0, 4.0] {
        let p = params(0.9, g, 1000.0);
        let (a, b) = gamma_rescale_equivalence(&land, &[0.1, -0.2, 0.0], 1, &p, 11).unwrap();
        assert_tilts_coupled(&a, &b, g, 0.0);
    }
}

#[test]
fn gamma_rescale_is_close_for_other_rates() {
    let land = Landscape::new(vec![0.0, 0.7, -0.3, 0.2]).unwrap();
    let p = params(0.9, 3.0, 300.0);
    let (a, b) = gamma_rescale_equivalence(&land, &[0.1, -0.2, 0.0], 1, &p, 12).unwrap();
    assert_tilts_coupled(&a, &b, 3.0, 1e-9);
}

#[test]
fn clt_variance_of_zero_observable_is_zero() {
    let land = Landscape::flat(1);
    let p = params(1.0, 1.0, 1000.0);
    let traj = simulate_logged(&land, PdmpState::at_rest(0, &land).unwrap(), &p, &mut derive_stream(13, 0));
    let est = clt_variance(&traj, |_, _| 0.0, 32).unwrap();
    assert_eq!(est.asymptotic_variance, 0.0);
    assert!(clt_variance(&traj, |_, _| 0.0, 8).is_err());
}

#[test]
fn clt_variance_matches_replica_spread() {
    let land = Landscape::flat(1);
    let horizon = 1e4;
    let p = params(1.0, 1.0, horizon);
    let out = run_replicas(14, 256, |_, rng| {
        let traj = simulate_logged(&land, PdmpState::at_rest(0, &land).unwrap(), &p, rng);
        let m = traj.ergodic_mean_x(1).unwrap();
        let c = clt_variance(&traj, |x, _| x[0], 32).unwrap().asymptotic_variance;
        (horizon.sqrt() * m, c)
    });
    let scaled: Vec<f64> = out.iter().map(|o| o.0).collect();
    let (_, oracle) = mean_var(&scaled);
    let batch = out.iter().map(|o| o.1).sum::<f64>() / out.len() as f64;
    assert!((batch / oracle - 1.0).abs() < 0.25, "batch {batch} vs replicas {oracle}");
}

#[test]
fn clt_variance_is_stable_when_doubling_horizon() {
    let land = Landscape::flat(2);
    let est = |h: f64| {
        let p = params(1.0, 1.0, h);
        let traj = simulate_logged(&land, PdmpState::at_rest(0, &land).unwrap(), &p, &mut derive_stream(15, 0));
        clt_variance(&traj, |x, _| x[0], 32).unwrap().asymptotic_variance
    };
    let (a, b) = (est(2e4), est(4e4));
    assert!(a / b < 2.0 && b / a < 2.0, "{a} {b}");
}

#[test]
fn marginal_density_properties() {
    for (beta, gamma, shift) in [(1.0, 1.0, 0.0), (2.0, 0.5, 0.7), (0.3, 3.0, -1.2), (1.0, 1e-3, 0.1)] {
        let m = MarginalDensity::new(beta, gamma, shift).unwrap();
        assert_eq!(m.mode(), -shift);
        for u in [0.01, 0.3, 1.0, 2.5] {
            let (a, b) = (m.pdf(-shift + u), m.pdf(-shift - u));
            assert!((a - b).abs() <= 1e-13 * a.max(1e-300), "{a} {b}");
            assert!(m.pdf(-shift) > a);
        }
        let (lo, hi) = m.support();
        let mass = crate::stats::integrate(|y| m.pdf(y), &[lo, -shift, hi]).unwrap();
        assert!((mass - 1.0).abs() < 1e-8, "{mass}");
    }
}

#[test]
fn marginal_density_agrees_with_direct_formula() {
    let (b, g) = (1.0, 1.0);
    let direct = |y: f64| (-(2.0 / (b * g)) * (b * y).cosh()).exp();
    let z = crate::stats::integrate(direct, &[-12.0, 0.0, 12.0]).unwrap();
    let land = Landscape::flat(1);
    let p = params(b, g, 1.0);
    for y in [-2.0, -0.5, 0.0, 0.3, 1.7] {
        let v = invariant_marginal_density(1, y, &land, &p).unwrap();
        assert!((v - direct(y) / z).abs() < 1e-10);
    }
}

struct Constant;
impl TestFunction for Constant {
    fn value(&self, _: &[f64], _: usize) -> f64 {
        3.5
    }
    fn partial(&self, _: &[f64], _: usize, _: usize) -> f64 {
        0.0
    }
}

#[test]
fn generator_kills_constants() {
    let land = Landscape::new(vec![0.0, 0.4, -1.0]).unwrap();
    let p = params(1.0, 2.0, 1.0);
    for site in 0..=2 {
        assert_eq!(generator_apply(&Constant, &[0.3, -0.2], site, &land, &p), 0.0);
    }
}

#[test]
fn generator_on_edge_coordinate() {
    // f(x, k) = x_1: Lf = γ(1{k=1}) − γ(1{k=0}) with no jump terms
    struct First;
    impl TestFunction for First {
        fn value(&self, x: &[f64], _: usize) -> f64 {
            x[0]
        }
        fn partial(&self, _: &[f64], _: usize, e: usize) -> f64 {
            (e == 1) as u8 as f64
        }
    }
    let land = Landscape::flat(1);
    let p = params(1.0, 2.0, 1.0);
    assert_eq!(generator_apply(&First, &[0.5], 0, &land, &p), -2.0);
    assert_eq!(generator_apply(&First, &[0.5], 1, &land, &p), 2.0);
}

fn bump_family() -> Vec<BumpPolynomial> {
    vec![
        BumpPolynomial { sites: vec![(vec![1.0], 0.0, 1.5), (vec![0.0], 0.0, 1.0)] },
        BumpPolynomial { sites: vec![(vec![0.0, 1.0], 0.3, 2.0), (vec![1.0, 0.0, -1.0], -0.2, 1.5)] },
        BumpPolynomial { sites: vec![(vec![2.0, -1.0, 0.5], 0.5, 1.0), (vec![0.0, 0.0, 0.0, 1.0], 0.0, 2.5)] },
    ]
}

#[test]
fn generator_integrates_to_zero_k1() {
    for (land, p) in [
        (Landscape::flat(1), params(1.0, 1.0, 1.0)),
        (Landscape::new(vec![0.0, 0.8]).unwrap(), params(1.5, 0.5, 1.0)),
    ] {
        for f in bump_family() {
            let v = invariant_expectation(|x, k| generator_apply(&f, x, k, &land, &p), &land, &p).unwrap();
            assert!(v.abs() < 1e-6, "{v}");
        }
    }
}

#[test]
fn generator_integrates_to_zero_k2() {
    let land = Landscape::new(vec![0.0, 0.3, -0.2]).unwrap();
    let p = params(1.0, 1.0, 1.0);
    let f = BumpPolynomial {
        sites: vec![(vec![1.0, 0.5], 0.0, 2.0), (vec![0.0, 1.0], 0.2, 1.5), (vec![1.0], -0.3, 1.8)],
    };
    let v = invariant_expectation(|x, k| generator_apply(&f, x, k, &land, &p), &land, &p).unwrap();
    let scale = invariant_expectation(|x, k| generator_apply(&f, x, k, &land, &p).abs(), &land, &p).unwrap();
    assert!(scale > 1e-3);
    assert!(v.abs() < 1e-6, "{v}");
}

#[test]
fn wrong_density_fails_the_invariance_check() {
    // the same check with γ doubled in the generator must not vanish
    let land = Landscape::flat(1);
    let p = params(1.0, 1.0, 1.0);
    let p2 = params(1.0, 2.0, 1.0);
    let f = &bump_family()[1];
    let v = invariant_expectation(|x, k| generator_apply(f, x, k, &land, &p2), &land, &p).unwrap();
    assert!(v.abs() > 1e-4, "{v}");
}

#[test]
fn time_weighted_marginal_matches_density() {
    let land = Landscape::flat(2);
    let p = params(1.0, 1.0, 2e4);
    let mut sampler = MarginalSampler::new(1, 0.05);
    simulate(PdmpState::at_rest(0, &land).unwrap(), &p, &mut derive_stream(16, 0), &mut sampler);
    let cdf = MarginalDensity::new(1.0, 1.0, 0.0).unwrap().tabulated_cdf(4000).unwrap();
    let ks = ks_one_sample(&sampler.sample, |y| cdf.eval(y)).unwrap();
    assert!(ks.statistic < 0.03, "{ks:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bookkeeping_holds_for_random_setups(
        a in prop::collection::vec(-1.5f64..1.5, 2..5),
        beta in 0.3f64..2.0,
        gamma in 0.2f64..2.0,
        seed in 0u64..1000,
        site_pick in 0usize..8,
        x0_scale in 0.0f64..1.0,
    ) {
        let land = Landscape::new(a).unwrap();
        let k = land.edges();
        let x0: Vec<f64> = (0..k).map(|e| x0_scale * ((e as f64) - 1.0)).collect();
        let init = PdmpState::new(&x0, site_pick % (k + 1), &land).unwrap();
        let p = params(beta, gamma, 200.0);
        let traj = simulate_logged(&land, init, &p, &mut derive_stream(seed, 0));
        check_bookkeeping(&traj);
        prop_assert_eq!(traj.final_state.time(), 200.0);
    }

    #[test]
    fn flatten_coupling_exact_for_random_landscapes(
        a in prop::collection::vec(-2.0f64..2.0, 2..5),
        seed in 0u64..1000,
    ) {
        let land = Landscape::new(a).unwrap();
        let (x, y) = flatten_equivalence(&land, 0, &params(1.0, 1.0, 100.0), seed).unwrap();
        assert_tilts_coupled(&x, &y, 1.0, 0.0);
    }
}
