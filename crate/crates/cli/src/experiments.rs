//! One runner per subcommand. Each reads and validates its whole
//! configuration before simulating, runs replicas on independent streams and
//! writes its CSVs plus `summary.csv` into the output directory.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Result};
use metadyn::nonadiabatic::{
    four_state_model, run_2d, simp_simulate, FourStateSummary, SimpDensity, SimpParams, SimpPhase, SimpState,
    TwoDConfig,
};
use metadyn::pdmp::{simulate, simulate_logged, Landscape, MarginalDensity, Observer, PdmpState, SimParams};
use metadyn::ray_knight::{direct_profile_sim, rk_walk_profile};
use metadyn::sand::sand_drift_check;
use metadyn::stats::{chi_square_uniform, ks_two_sample, BatchMeans, WeightedSample};
use metadyn::torus::{init_from_potential, invariant_moments, run, TrigPotential};
use metadyn::{derive_stream, run_replicas};

use crate::config::{ExperimentConfig, KeyError, Source};
use crate::output::{num, write_csv, TimeHistogram};

pub struct Common {
    pub seed: u64,
    pub replicas: usize,
}

pub fn common(cfg: &ExperimentConfig) -> Result<Common, KeyError> {
    let replicas = cfg.usize("replicas")?;
    if replicas == 0 {
        return Err(KeyError::new("replicas", "must be at least 1"));
    }
    Ok(Common {
        seed: cfg.u64("seed")?,
        replicas,
    })
}

fn mean_of(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut acc = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v / n;
        }
    }
    acc
}

pub const TORUS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("replicas", "1"),
    ("out", "out"),
    ("n", "2"),
    ("gamma", "1"),
    ("beta", "1"),
    ("dt", "1e-3"),
    ("horizon", "1e4"),
    ("grid", "128"),
    ("f_cos", "0,1"),
    ("f_sin", "0.5"),
    ("f_mean", "0"),
    ("z0", "0"),
    ("stride", "100"),
    ("allow_violation", "false"),
];

pub fn torus(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let c = common(cfg)?;
    let f = TrigPotential::new(cfg.list("f_cos")?, cfg.list("f_sin")?, cfg.f64("f_mean")?)?;
    let n = cfg.usize("n")?;
    let (gamma, beta, z0) = (cfg.f64("gamma")?, cfg.positive("beta")?, cfg.f64("z0")?);
    let (dt, horizon) = (cfg.positive("dt")?, cfg.positive("horizon")?);
    let grid_size = cfg.usize("grid")?;
    let stride = cfg.usize("stride")?;
    if stride == 0 {
        return Err(KeyError::new("stride", "must be at least 1").into());
    }
    if ((horizon / dt).round() as u64) < 2 * stride as u64 {
        return Err(KeyError::new("stride", "the run must record at least two snapshots").into());
    }
    if grid_size == 0 {
        return Err(KeyError::new("grid", "must be at least 1").into());
    }
    let allow = cfg.bool("allow_violation")?;
    // validates N, gamma and beta against the potential
    init_from_potential(&f, n, gamma, beta, z0, allow)?;

    let grid: Vec<f64> = (0..grid_size).map(|i| -PI + 2.0 * PI * i as f64 / grid_size as f64).collect();
    let results = run_replicas(c.seed, c.replicas, |_, rng| -> metadyn::Result<_> {
        let mut s = init_from_potential(&f, n, gamma, beta, z0, allow)?;
        let trace = run(&mut s, dt, horizon, stride, rng)?;
        let psi = s.averaged_penalty(&grid)?;
        let (aa, ab) = s.averages()?;
        Ok((psi, aa, ab, invariant_moments(&trace, 16)?))
    })
    .into_iter()
    .collect::<metadyn::Result<Vec<_>>>()?;

    let psi = mean_of(&results.iter().map(|r| r.0.clone()).collect::<Vec<_>>());
    let target: Vec<f64> = grid.iter().map(|&z| f.mean() - f.value(z)).collect();
    write_csv(
        &out.join("penalty.csv"),
        &["z", "avg_psi", "minus_F_plus_mean"],
        grid.iter().zip(&psi).zip(&target).map(|((z, p), t)| vec![num(*z), num(*p), num(*t)]),
    )?;

    let avg_alpha = mean_of(&results.iter().map(|r| r.1.clone()).collect::<Vec<_>>());
    let avg_beta = mean_of(&results.iter().map(|r| r.2.clone()).collect::<Vec<_>>());
    let var_alpha = mean_of(&results.iter().map(|r| r.3.var_alpha.clone()).collect::<Vec<_>>());
    let var_beta = mean_of(&results.iter().map(|r| r.3.var_beta.clone()).collect::<Vec<_>>());
    write_csv(
        &out.join("modes.csv"),
        &["mode", "avg_alpha", "avg_beta", "var_alpha", "var_beta"],
        (0..n).map(|k| {
            vec![
                (k + 1).to_string(),
                num(avg_alpha[k]),
                num(avg_beta[k]),
                num(var_alpha[k]),
                num(var_beta[k]),
            ]
        }),
    )?;

    let mut counts = vec![0u64; 16];
    for r in &results {
        for (c, v) in counts.iter_mut().zip(&r.3.z_histogram) {
            *c += v;
        }
    }
    let chi = chi_square_uniform(&counts)?;
    let sup = psi.iter().zip(&target).map(|(p, t)| (p - t).abs()).fold(0.0, f64::max);
    let mut header = vec!["sup_error".to_string()];
    let mut row = vec![num(sup)];
    for k in 0..n {
        header.push(format!("var_alpha_{}", k + 1));
        row.push(num(var_alpha[k]));
    }
    header.push("z_chi2_p".into());
    row.push(num(chi.p_value));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("summary.csv"), &header, [row])
}

pub const DISCRETE: &[(&str, &str)] = &[
    ("seed", "0"),
    ("replicas", "1"),
    ("out", "out"),
    ("k", "2"),
    ("a", "flat"),
    ("beta", "1"),
    ("gamma", "1"),
    ("horizon", "1e4"),
    ("site", "0"),
    ("batches", "32"),
    ("density_bins", "60"),
    ("sand_check", "false"),
];

/// Batch means and a time-weighted histogram for every edge.
struct EdgeRecorder {
    batches: Vec<BatchMeans>,
    hists: Vec<TimeHistogram>,
}

impl Observer for EdgeRecorder {
    fn segment(&mut self, state: &PdmpState, dt: f64, gamma: f64) {
        if dt <= 0.0 {
            return;
        }
        for k in 1..=state.edges() {
            let (x0, x1) = (state.x(k), state.x_after(k, dt, gamma));
            self.batches[k - 1].push_linear(x0, state.x_after(k, 1.0, gamma) - x0, dt);
            self.hists[k - 1].add(x0, x1, dt);
        }
    }
}

fn landscape(cfg: &ExperimentConfig) -> Result<Landscape> {
    let k = cfg.usize("k")?;
    if cfg.raw("a") == "flat" {
        if k == 0 {
            return Err(KeyError::new("k", "need at least one edge").into());
        }
        return Ok(Landscape::flat(k));
    }
    let values = cfg.list("a")?;
    if values.len() < 2 {
        return Err(KeyError::new("a", "need at least two values A_0..A_K").into());
    }
    if cfg.source("k") != Source::Default && values.len() != k + 1 {
        return Err(KeyError::new("k", format!("K = {k} but `a` lists {} values", values.len())).into());
    }
    Ok(Landscape::new(values)?)
}

pub fn discrete(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let c = common(cfg)?;
    let land = landscape(cfg)?;
    let edges = land.edges();
    let params = SimParams::new(cfg.f64("beta")?, cfg.f64("gamma")?, cfg.f64("horizon")?)?;
    let site = cfg.usize("site")?;
    let init = PdmpState::at_rest(site, &land).map_err(|_| KeyError::new("site", format!("must lie in 0..={edges}")))?;
    let batches = cfg.usize("batches")?;
    if batches < 2 {
        return Err(KeyError::new("batches", "need at least 2").into());
    }
    let cells = cfg.usize("density_bins")?;
    if cells == 0 {
        return Err(KeyError::new("density_bins", "must be at least 1").into());
    }
    let sand_check = cfg.bool("sand_check")?;
    let densities: Vec<MarginalDensity> = (1..=edges)
        .map(|k| MarginalDensity::for_edge(k, &land, &params))
        .collect::<metadyn::Result<_>>()?;

    let t = params.horizon;
    let results = run_replicas(c.seed, c.replicas, |_, rng| {
        let mut rec = EdgeRecorder {
            batches: (0..edges).map(|_| BatchMeans::new(t, batches)).collect(),
            hists: densities
                .iter()
                .map(|d| {
                    let (lo, hi) = d.support();
                    TimeHistogram::new(lo, hi, cells)
                })
                .collect(),
        };
        let end = simulate(init.clone(), &params, rng, &mut rec);
        let m: Vec<f64> = (1..=edges).map(|k| end.integral_x(k) / t).collect();
        let ch: Vec<f64> = rec.batches.iter().map(|b| b.estimate().asymptotic_variance).collect();
        (m, ch, rec.hists)
    });

    let m = mean_of(&results.iter().map(|r| r.0.clone()).collect::<Vec<_>>());
    let ch = mean_of(&results.iter().map(|r| r.1.clone()).collect::<Vec<_>>());
    let ap = land.increments();
    write_csv(
        &out.join("free_energy.csv"),
        &["k", "M_t", "minus_Aprime", "c_k_hat"],
        (0..edges).map(|i| vec![(i + 1).to_string(), num(m[i]), num(0.0 - ap[i]), num(ch[i])]),
    )?;

    let mut rows = Vec::new();
    for (i, d) in densities.iter().enumerate() {
        let mut h = results[0].2[i].clone();
        for r in &results[1..] {
            h.merge(&r.2[i]);
        }
        for (y, e) in h.centres().zip(h.densities()) {
            rows.push(vec![(i + 1).to_string(), num(y), num(e), num(d.pdf(y))]);
        }
    }
    write_csv(&out.join("density.csv"), &["k", "y", "empirical_density", "analytic_density"], rows)?;

    let mut header = Vec::new();
    let mut row = Vec::new();
    for i in 0..edges {
        let k = i + 1;
        header.extend([format!("M_t_{k}"), format!("minus_Aprime_{k}"), format!("se_{k}")]);
        row.extend([num(m[i]), num(0.0 - ap[i]), num((ch[i] / (t * c.replicas as f64)).sqrt())]);
    }
    if sand_check {
        let traj = simulate_logged(&land, init, &params, &mut derive_stream(c.seed, 0));
        let drift = sand_drift_check(&traj)?;
        header.extend(["sand_max_residual".into(), "sand_time_at_max".into()]);
        row.extend([num(drift.max_residual), num(drift.time_at_max)]);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("summary.csv"), &header, [row])
}

pub const RAYKNIGHT: &[(&str, &str)] = &[
    ("seed", "0"),
    ("replicas", "1000"),
    ("out", "out"),
    ("k", "1"),
    ("j", "0"),
    ("r", "1"),
    ("beta", "1"),
    ("i0", "0"),
];

pub fn rayknight_validate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let c = common(cfg)?;
    let k = cfg.usize("k")?;
    if k == 0 {
        return Err(KeyError::new("k", "need at least one edge").into());
    }
    let j = cfg.usize("j")?;
    if j > k {
        return Err(KeyError::new("j", format!("must lie in 0..={k}")).into());
    }
    let i0 = cfg.usize("i0")?;
    if i0 > k {
        return Err(KeyError::new("i0", format!("must lie in 0..={k}")).into());
    }
    let (r, beta) = (cfg.positive("r")?, cfg.positive("beta")?);
    let x0 = vec![0.0; k];
    let n = c.replicas;
    // walk replicas use stream indices 0..n, direct ones n..2n
    let profiles = run_replicas(c.seed, 2 * n, |idx, rng| {
        if idx < n {
            rk_walk_profile(&x0, i0, j, r, beta, rng).map(|p| p.values)
        } else {
            direct_profile_sim(&x0, i0, j, r, beta, rng).map(|p| p.values)
        }
    })
    .into_iter()
    .collect::<metadyn::Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (idx, values) in profiles.iter().enumerate() {
        let (source, replica) = if idx < n { ("walk", idx) } else { ("direct", idx - n) };
        for (site, v) in values.iter().enumerate() {
            rows.push(vec![site.to_string(), source.into(), replica.to_string(), num(*v)]);
        }
    }
    write_csv(&out.join("profiles.csv"), &["k", "source", "replica", "lambda"], rows)?;

    let mut summary = Vec::new();
    for site in (0..=k).filter(|&s| s != j) {
        let pick = |range: std::ops::Range<usize>| {
            WeightedSample::unweighted(profiles[range].iter().map(|v| v[site]).collect())
        };
        let ks = ks_two_sample(&pick(0..n), &pick(n..2 * n))?;
        summary.push(vec![site.to_string(), num(ks.statistic), num(ks.p_value)]);
    }
    write_csv(&out.join("summary.csv"), &["k", "ks_statistic", "p_value"], summary)
}

pub const TWO_D: &[(&str, &str)] = &[
    ("seed", "0"),
    ("replicas", "1"),
    ("out", "out"),
    ("gamma", "0.1"),
    ("beta", "0.02"),
    ("dt", "1e-4"),
    ("horizon", "1e3"),
    ("intervals", "40"),
    ("x0", "0"),
    ("y0", "6"),
];

pub fn nonadiabatic_2d(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let c = common(cfg)?;
    let config = TwoDConfig {
        deposition: cfg.f64("gamma")?,
        inv_temp: cfg.f64("beta")?,
        dt: cfg.f64("dt")?,
        horizon: cfg.f64("horizon")?,
        intervals: cfg.usize("intervals")?,
        x0: cfg.f64("x0")?,
        y0: cfg.f64("y0")?,
    };
    config.validate()?;
    let results = run_replicas(c.seed, c.replicas, |_, rng| run_2d(&config, rng))
        .into_iter()
        .collect::<metadyn::Result<Vec<_>>>()?;
    let slope = mean_of(&results.iter().map(|r| r.avg_slope.clone()).collect::<Vec<_>>());
    let first = &results[0];
    write_csv(
        &out.join("slopes.csv"),
        &["x_node", "avg_dpsi_dx", "minus_Fprime"],
        first
            .node_x
            .iter()
            .zip(&slope)
            .zip(&first.minus_fprime)
            .map(|((x, s), f)| vec![num(*x), num(*s), num(*f)]),
    )?;
    write_csv(
        &out.join("summary.csv"),
        &["replica", "sup_gap"],
        results.iter().enumerate().map(|(i, r)| vec![i.to_string(), num(r.gap)]),
    )
}

pub const BINS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("replicas", "1"),
    ("out", "out"),
    ("v", "0,2,2,0.5"),
    ("beta", "1"),
    ("gamma", "1"),
    ("horizon", "1e5"),
    ("batches", "32"),
    ("record_every", "100"),
];

pub fn bins(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let c = common(cfg)?;
    let v: [f64; 4] = cfg
        .list("v")?
        .try_into()
        .map_err(|_| KeyError::new("v", "need exactly four potential values"))?;
    let (beta, gamma) = (cfg.f64("beta")?, cfg.f64("gamma")?);
    four_state_model(v, beta, gamma)?;
    let horizon = cfg.positive("horizon")?;
    let batches = cfg.usize("batches")?;
    if batches < 2 {
        return Err(KeyError::new("batches", "need at least 2").into());
    }
    let every = cfg.positive("record_every")?;

    let results = run_replicas(c.seed, c.replicas, |idx, rng| {
        let mut series = Vec::new();
        let mut next = every;
        let summary = FourStateSummary::run(v, beta, gamma, horizon, batches, rng, |s, dt| {
            if idx != 0 {
                return;
            }
            let t0 = s.time();
            // the walker sits in the right bin on sites 2 and 3
            let slope = if s.site() >= 2 { gamma } else { -gamma };
            while next <= t0 + dt && next <= horizon {
                let tau = next - t0;
                let x = s.x(2) + slope * tau;
                let integral = s.integral_x(2) + s.x(2) * tau + 0.5 * slope * tau * tau;
                series.push((next, x, integral / next));
                next += every;
            }
        });
        (summary, series)
    });
    let mut summaries = Vec::new();
    for (s, _) in &results {
        match s {
            Ok(s) => summaries.push(s),
            Err(e) => bail!(e.clone()),
        }
    }
    let (heuristic, fe_diff) = (summaries[0].heuristic, summaries[0].fe_diff);
    write_csv(
        &out.join("series.csv"),
        &["t", "X_t", "ergodic_mean", "heuristic", "fe_diff"],
        results[0]
            .1
            .iter()
            .map(|(t, x, m)| vec![num(*t), num(*x), num(*m), num(heuristic), num(fe_diff)]),
    )?;
    write_csv(
        &out.join("summary.csv"),
        &["replica", "ergodic_mean", "std_error", "heuristic", "fe_diff"],
        summaries.iter().enumerate().map(|(i, s)| {
            vec![
                i.to_string(),
                num(s.estimate.mean),
                num(s.estimate.std_error),
                num(s.heuristic),
                num(s.fe_diff),
            ]
        }),
    )
}

pub const SIMP: &[(&str, &str)] = &[
    ("seed", "0"),
    ("replicas", "1"),
    ("out", "out"),
    ("beta", "1"),
    ("gamma", "1"),
    ("d_plus", "1.5"),
    ("d_minus", "2"),
    ("horizon", "1e5"),
    ("batches", "32"),
    ("cells", "200"),
    ("x0", "0"),
];

pub fn simp(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let c = common(cfg)?;
    let params = SimpParams::new(cfg.f64("beta")?, cfg.f64("gamma")?, cfg.f64("d_plus")?, cfg.f64("d_minus")?)?;
    let horizon = cfg.positive("horizon")?;
    let batches = cfg.usize("batches")?;
    if batches < 2 {
        return Err(KeyError::new("batches", "need at least 2").into());
    }
    let cells = cfg.usize("cells")?;
    if cells == 0 {
        return Err(KeyError::new("cells", "must be at least 1").into());
    }
    let x0 = cfg.f64("x0")?;
    if !x0.is_finite() {
        return Err(KeyError::new("x0", "must be finite").into());
    }
    let density = SimpDensity::new(&params)?;
    let quadrature = density.mean()?;
    let (lo, hi) = density.support();
    let gamma = params.deposition;

    let results = run_replicas(c.seed, c.replicas, |_, rng| {
        let mut hist = TimeHistogram::new(lo, hi, cells);
        let sim = simp_simulate(&params, SimpState::new(x0, SimpPhase::Zero), horizon, batches, rng, |s, dt| {
            let v = match s.phase {
                SimpPhase::Minus => -gamma,
                SimpPhase::Zero => 0.0,
                SimpPhase::Plus => gamma,
            };
            hist.add(s.x, s.x + v * dt, dt);
        });
        sim.map(|s| (s, hist))
    })
    .into_iter()
    .collect::<metadyn::Result<Vec<_>>>()?;

    let mut hist = results[0].1.clone();
    for r in &results[1..] {
        hist.merge(&r.1);
    }
    write_csv(
        &out.join("density.csv"),
        &["x", "mu_minus", "mu_zero", "mu_plus", "empirical"],
        hist.centres().zip(hist.densities()).map(|(x, e)| {
            let (m, z, p) = density.densities(x);
            vec![num(x), num(m), num(z), num(p), num(e)]
        }),
    )?;
    write_csv(
        &out.join("summary.csv"),
        &["replica", "mean", "std_error", "quadrature_mean", "asymptotic_mean"],
        results.iter().enumerate().map(|(i, (s, _))| {
            vec![
                i.to_string(),
                num(s.mean.mean),
                num(s.mean.std_error),
                num(quadrature),
                num(params.asymptotic_mean()),
            ]
        }),
    )
}
