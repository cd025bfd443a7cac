//! `metadyn`: command-line experiments for metadynamics simulations.

mod config;
mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, KeyError};
use output::write_csv;

#[derive(Parser, Debug)]
#[command(name = "metadyn", version, about = "Metadynamics simulation experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Base seed; replica `i` draws from stream `(seed, i)`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of independent replicas.
    #[arg(long, global = true)]
    replicas: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat `key = value` file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Adiabatic metadynamics on the circle in Fourier form.
    #[command(allow_negative_numbers = true)]
    Torus(TorusArgs),
    /// Exact simulation of the discrete self-repelling walk.
    #[command(allow_negative_numbers = true)]
    Discrete(DiscreteArgs),
    /// Local-time profiles by the Ray-Knight walk against direct simulation.
    #[command(name = "rayknight-validate", allow_negative_numbers = true)]
    RayknightValidate(RayKnightArgs),
    /// 2D diffusion biased along one coordinate by a Gaussian mesh.
    #[command(name = "nonadiabatic-2d", allow_negative_numbers = true)]
    Nonadiabatic2d(TwoDArgs),
    /// Four-site walk with the bias shared over two bins.
    #[command(allow_negative_numbers = true)]
    Bins(BinsArgs),
    /// Three-state model with an explicit invariant law.
    #[command(allow_negative_numbers = true)]
    Simp(SimpArgs),
}

#[derive(Args, Debug)]
struct TorusArgs {
    /// Truncation order N.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Inverse temperature; `inf` turns the noise off.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Points of the output grid on the circle.
    #[arg(long)]
    grid: Option<usize>,
    /// Cosine coefficients of F, comma separated.
    #[arg(long)]
    f_cos: Option<String>,
    /// Sine coefficients of F, comma separated.
    #[arg(long)]
    f_sin: Option<String>,
    #[arg(long)]
    f_mean: Option<f64>,
    #[arg(long)]
    z0: Option<f64>,
    /// Steps between snapshots used for the moments.
    #[arg(long)]
    stride: Option<usize>,
    /// Keep modes of F above N frozen instead of rejecting them.
    #[arg(long)]
    allow_violation: Option<bool>,
}

#[derive(Args, Debug)]
struct DiscreteArgs {
    /// Number of edges K.
    #[arg(long)]
    k: Option<usize>,
    /// Free energy A_0..A_K, comma separated, or `flat`.
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Starting site.
    #[arg(long)]
    site: Option<usize>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    density_bins: Option<usize>,
    /// Also check the sand identity along the first replica.
    #[arg(long)]
    sand_check: bool,
}

#[derive(Args, Debug)]
struct RayKnightArgs {
    #[arg(long)]
    k: Option<usize>,
    /// Anchor site.
    #[arg(long)]
    j: Option<usize>,
    /// Local time at the anchor.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Starting site.
    #[arg(long)]
    i0: Option<usize>,
}

#[derive(Args, Debug)]
struct TwoDArgs {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Mesh intervals on the circle.
    #[arg(long)]
    intervals: Option<usize>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    y0: Option<f64>,
}

#[derive(Args, Debug)]
struct BinsArgs {
    /// Potential on the four sites, comma separated.
    #[arg(long)]
    v: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    batches: Option<usize>,
    /// Time between rows of the series.
    #[arg(long)]
    record_every: Option<f64>,
}

#[derive(Args, Debug)]
struct SimpArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    d_plus: Option<f64>,
    #[arg(long)]
    d_minus: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    batches: Option<usize>,
    /// Cells of the density grid.
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    x0: Option<f64>,
}

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

type Runner = fn(&ExperimentConfig, &Path) -> Result<()>;

impl Command {
    fn plan(&self) -> (&'static str, &'static [(&'static str, &'static str)], Vec<(&'static str, Option<String>)>, Runner) {
        match self {
            Command::Torus(a) => (
                "torus",
                experiments::TORUS,
                vec![
                    ("n", s(&a.n)),
                    ("gamma", s(&a.gamma)),
                    ("beta", s(&a.beta)),
                    ("dt", s(&a.dt)),
                    ("horizon", s(&a.horizon)),
                    ("grid", s(&a.grid)),
                    ("f_cos", a.f_cos.clone()),
                    ("f_sin", a.f_sin.clone()),
                    ("f_mean", s(&a.f_mean)),
                    ("z0", s(&a.z0)),
                    ("stride", s(&a.stride)),
                    ("allow_violation", s(&a.allow_violation)),
                ],
                experiments::torus,
            ),
            Command::Discrete(a) => (
                "discrete",
                experiments::DISCRETE,
                vec![
                    ("k", s(&a.k)),
                    ("a", a.a.clone()),
                    ("beta", s(&a.beta)),
                    ("gamma", s(&a.gamma)),
                    ("horizon", s(&a.horizon)),
                    ("site", s(&a.site)),
                    ("batches", s(&a.batches)),
                    ("density_bins", s(&a.density_bins)),
                    ("sand_check", a.sand_check.then(|| "true".to_string())),
                ],
                experiments::discrete,
            ),
            Command::RayknightValidate(a) => (
                "rayknight-validate",
                experiments::RAYKNIGHT,
                vec![
                    ("k", s(&a.k)),
                    ("j", s(&a.j)),
                    ("r", s(&a.r)),
                    ("beta", s(&a.beta)),
                    ("i0", s(&a.i0)),
                ],
                experiments::rayknight_validate,
            ),
            Command::Nonadiabatic2d(a) => (
                "nonadiabatic-2d",
                experiments::TWO_D,
                vec![
                    ("gamma", s(&a.gamma)),
                    ("beta", s(&a.beta)),
                    ("dt", s(&a.dt)),
                    ("horizon", s(&a.horizon)),
                    ("intervals", s(&a.intervals)),
                    ("x0", s(&a.x0)),
                    ("y0", s(&a.y0)),
                ],
                experiments::nonadiabatic_2d,
            ),
            Command::Bins(a) => (
                "bins",
                experiments::BINS,
                vec![
                    ("v", a.v.clone()),
                    ("beta", s(&a.beta)),
                    ("gamma", s(&a.gamma)),
                    ("horizon", s(&a.horizon)),
                    ("batches", s(&a.batches)),
                    ("record_every", s(&a.record_every)),
                ],
                experiments::bins,
            ),
            Command::Simp(a) => (
                "simp",
                experiments::SIMP,
                vec![
                    ("beta", s(&a.beta)),
                    ("gamma", s(&a.gamma)),
                    ("d_plus", s(&a.d_plus)),
                    ("d_minus", s(&a.d_minus)),
                    ("horizon", s(&a.horizon)),
                    ("batches", s(&a.batches)),
                    ("cells", s(&a.cells)),
                    ("x0", s(&a.x0)),
                ],
                experiments::simp,
            ),
        }
    }
}

/// The key an error refers to, if any.
fn offending_key(err: &anyhow::Error) -> String {
    for cause in err.chain() {
        if let Some(k) = cause.downcast_ref::<KeyError>() {
            return k.key.clone();
        }
        if let Some(metadyn::Error::InvalidParameter { name, .. }) = cause.downcast_ref::<metadyn::Error>() {
            return name.to_string();
        }
    }
    String::new()
}

fn execute(cli: &Cli) -> Result<(), (anyhow::Error, Option<PathBuf>)> {
    let (name, defaults, mut flags, runner) = cli.command.plan();
    let mut cfg = ExperimentConfig::with_defaults(name, defaults);
    let g = &cli.global;
    flags.extend([
        ("seed", s(&g.seed)),
        ("replicas", s(&g.replicas)),
        ("out", g.out.as_ref().map(|p| p.display().to_string())),
    ]);
    let merge = || -> Result<()> {
        if let Some(path) = &g.config {
            cfg.merge_file(path)?;
        }
        cfg.merge_flags(flags)
    };
    let merged = merge();
    let out = PathBuf::from(cfg.raw("out"));
    let fail = |e: anyhow::Error| (e, Some(out.clone()));
    merged.map_err(fail)?;
    experiments::common(&cfg).map_err(|e| fail(e.into()))?;
    std::fs::create_dir_all(&out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(|e| (e, None))?;
    std::fs::write(out.join("config.txt"), cfg.render())
        .context("writing config sidecar")
        .map_err(fail)?;
    runner(&cfg, &out).map_err(fail)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((err, out)) => {
            let key = offending_key(&err);
            eprintln!("error: {err:#}");
            if let Some(dir) = out {
                let record = std::fs::create_dir_all(&dir).map_err(anyhow::Error::from).and_then(|_| {
                    write_csv(&dir.join("failure.csv"), &["status", "key", "message"], [vec![
                        "error".to_string(),
                        key,
                        format!("{err:#}"),
                    ]])
                });
                if let Err(e) = record {
                    eprintln!("error: could not write failure record: {e:#}");
                }
            }
            ExitCode::FAILURE
        }
    }
}
