//! Two-dimensional metadynamics biased along the periodic coordinate only.
//!
//! `(x, y) ∈ (−π, π] × ℝ` follows overdamped Langevin dynamics in
//! `V(x, y) = cos 2x + 0.05 (y − 3 cos 2x − 3)² + 0.5 sin x` plus a bias
//! `Ψ_t(x)` grown by Gaussians of width `ε` centred at `x_t`. The bias lives
//! on a uniform periodic mesh with piecewise-affine interpolation. The free
//! energy of `x` is `F(x) = cos 2x + 0.5 sin x`, so the time average of
//! `dΨ/dx` is compared with `−F'`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_positive, Error, Result};

/// Omitted Gaussian mass relative to the peak.
const IMAGE_TOL: f64 = 1e-12;

pub fn potential_v(x: f64, y: f64) -> f64 {
    let c = (2.0 * x).cos();
    let r = y - 3.0 * c - 3.0;
    c + 0.05 * r * r + 0.5 * x.sin()
}

pub fn grad_v(x: f64, y: f64) -> (f64, f64) {
    let (s2, c2) = (2.0 * x).sin_cos();
    let r = y - 3.0 * c2 - 3.0;
    let dx = -2.0 * s2 + 0.1 * r * 6.0 * s2 + 0.5 * x.cos();
    (dx, 0.1 * r)
}

/// `−F'(x) = 2 sin 2x − 0.5 cos x`.
pub fn minus_free_energy_slope(x: f64) -> f64 {
    2.0 * (2.0 * x).sin() - 0.5 * x.cos()
}

/// Maps `x` into `(−π, π]`.
fn wrap_angle(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let r = PI - (PI - x).rem_euclid(2.0 * PI);
    if r <= -PI {
        PI
    } else {
        r
    }
}

/// Piecewise-affine periodic function with nodes `−π + jε`, `ε = 2π/I`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasMesh {
    width: f64,
    nodes: Vec<f64>,
    /// Nodes reached by a Gaussian before it drops below the tolerance.
    reach: usize,
    /// Periodic images on each side needed for the tolerance.
    images: i64,
}

impl BiasMesh {
    pub fn new(intervals: usize) -> Result<Self> {
        if intervals < 3 {
            return Err(Error::invalid("intervals", format!("need at least 3, got {intervals}")));
        }
        let width = 2.0 * PI / intervals as f64;
        // a Gaussian of width ε is below IMAGE_TOL beyond `cut` from its centre
        let cut = width * (-2.0 * IMAGE_TOL.ln()).sqrt();
        let reach = ((cut / width).ceil() as usize + 1).min(intervals);
        // images at distance ≥ 2πm − π from any node
        let images = ((cut + PI) / (2.0 * PI)).floor() as i64;
        Ok(Self {
            width,
            nodes: vec![0.0; intervals],
            reach,
            images,
        })
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len()
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn node_x(&self, j: usize) -> f64 {
        -PI + self.width * j as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Cell index and offset fraction of `x`.
    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.nodes.len();
        let pos = (wrap_angle(x) + PI) / self.width;
        let j = (pos.floor() as usize).min(n - 1);
        (j, pos - j as f64)
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        let (j, w) = self.locate(x);
        self.nodes[j] * (1.0 - w) + self.nodes[(j + 1) % n] * w
    }

    /// Slope of the cell containing `x`.
    pub fn slope(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        let (j, _) = self.locate(x);
        (self.nodes[(j + 1) % n] - self.nodes[j]) / self.width
    }

    /// Mean of the two cell slopes adjacent to node `j`.
    pub fn node_slope(&self, j: usize) -> f64 {
        centred_slope(&self.nodes, j, self.width)
    }

    /// Periodised Gaussian `(2π ε²)^{-1/2} Σ_m exp(−(d − 2πm)²/(2ε²))`.
    fn kernel(&self, d: f64) -> f64 {
        let e2 = 2.0 * self.width * self.width;
        let mut s = 0.0;
        for m in -self.images..=self.images {
            let u = d - 2.0 * PI * m as f64;
            s += (-u * u / e2).exp();
        }
        s / ((2.0 * PI).sqrt() * self.width)
    }

    /// Adds `amount` times the periodised Gaussian centred at `x` and calls
    /// `touched(j, increment)` for each updated node.
    fn deposit_with<F: FnMut(usize, f64)>(&mut self, x: f64, amount: f64, mut touched: F) {
        let n = self.nodes.len();
        let (j, _) = self.locate(x);
        let x = wrap_angle(x);
        let lo = j as i64 - self.reach as i64 + 1;
        let hi = j as i64 + self.reach as i64;
        let span = if (hi - lo + 1) as usize >= n { (0, n as i64 - 1) } else { (lo, hi) };
        for jj in span.0..=span.1 {
            let node = jj.rem_euclid(n as i64) as usize;
            let d = wrap_angle(self.node_x(node) - x);
            let inc = amount * self.kernel(d);
            self.nodes[node] += inc;
            touched(node, inc);
        }
    }

    /// One deposition step: `γ δt` times the periodised Gaussian at `x`.
    pub fn deposit(&mut self, x: f64, gamma: f64, dt: f64) {
        if gamma == 0.0 {
            return;
        }
        self.deposit_with(x, gamma * dt, |_, _| {});
    }
}

fn centred_slope(v: &[f64], j: usize, width: f64) -> f64 {
    let n = v.len();
    (v[(j + 1) % n] - v[(j + n - 1) % n]) / (2.0 * width)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoDConfig {
    pub deposition: f64,
    pub inv_temp: f64,
    pub dt: f64,
    pub horizon: f64,
    pub intervals: usize,
    pub x0: f64,
    pub y0: f64,
}

impl Default for TwoDConfig {
    fn default() -> Self {
        Self {
            deposition: 0.1,
            inv_temp: 1.0 / 50.0,
            dt: 1e-4,
            horizon: 1e3,
            intervals: 40,
            x0: 0.0,
            y0: 6.0,
        }
    }
}

impl TwoDConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.deposition >= 0.0) {
            return Err(Error::invalid("gamma", format!("must be non-negative, got {}", self.deposition)));
        }
        ensure_positive("beta", self.inv_temp)?;
        ensure_positive("dt", self.dt)?;
        ensure_positive("horizon", self.horizon)?;
        if !(self.x0.is_finite() && self.y0.is_finite()) {
            return Err(Error::invalid("x0", "initial point must be finite"));
        }
        BiasMesh::new(self.intervals).map(|_| ())
    }

    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }
}

/// Euler–Maruyama state with the running time integral of the mesh.
///
/// A node that received `c` at the end of step `n` contributes `c (t − t_n)`
/// to `∫_0^t ψ_j`, so the integral is `t·ψ_j − Q_j` with `Q_j = Σ c t_n`.
#[derive(Debug, Clone)]
pub struct TwoDState {
    pub x: f64,
    pub y: f64,
    pub mesh: BiasMesh,
    pub time: f64,
    weighted: Vec<f64>,
}

impl TwoDState {
    pub fn new(config: &TwoDConfig) -> Result<Self> {
        config.validate()?;
        let mesh = BiasMesh::new(config.intervals)?;
        let n = mesh.intervals();
        Ok(Self {
            x: wrap_angle(config.x0),
            y: config.y0,
            mesh,
            time: 0.0,
            weighted: vec![0.0; n],
        })
    }

    /// `∫_0^t ψ_j(s) ds` for every node.
    pub fn node_integrals(&self) -> Vec<f64> {
        self.mesh
            .nodes
            .iter()
            .zip(&self.weighted)
            .map(|(p, q)| self.time * p - q)
            .collect()
    }

    /// `(1/t) ∫_0^t dΨ_s/dx ds` at every node.
    pub fn average_node_slopes(&self) -> Vec<f64> {
        let ints = self.node_integrals();
        (0..ints.len())
            .map(|j| centred_slope(&ints, j, self.mesh.width) / self.time)
            .collect()
    }

    /// One step: the force uses the bias before this step's deposit, which
    /// is centred at the pre-step position.
    pub fn step<R: Rng + ?Sized>(&mut self, gamma: f64, inv_temp: f64, dt: f64, rng: &mut R) {
        let sigma = (2.0 * dt / inv_temp).sqrt();
        let (gx, gy) = grad_v(self.x, self.y);
        let bias = self.mesh.slope(self.x);
        let (x_old, t_new) = (self.x, self.time + dt);
        if gamma != 0.0 {
            let weighted = &mut self.weighted;
            self.mesh.deposit_with(x_old, gamma * dt, |j, c| weighted[j] += c * t_new);
        }
        let nx: f64 = StandardNormal.sample(rng);
        let ny: f64 = StandardNormal.sample(rng);
        self.x = wrap_angle(self.x - (gx + bias) * dt + sigma * nx);
        self.y += -gy * dt + sigma * ny;
        self.time = t_new;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoDResult {
    pub node_x: Vec<f64>,
    pub avg_slope: Vec<f64>,
    pub minus_fprime: Vec<f64>,
    /// `max_j |avg_slope_j − (−F'(x_j))|`.
    pub gap: f64,
}

pub fn run_2d<R: Rng + ?Sized>(config: &TwoDConfig, rng: &mut R) -> Result<TwoDResult> {
    let mut s = TwoDState::new(config)?;
    for _ in 0..config.steps() {
        s.step(config.deposition, config.inv_temp, config.dt, rng);
    }
    let avg_slope = s.average_node_slopes();
    let node_x: Vec<f64> = (0..s.mesh.intervals()).map(|j| s.mesh.node_x(j)).collect();
    let minus_fprime: Vec<f64> = node_x.iter().map(|&x| minus_free_energy_slope(x)).collect();
    let gap = avg_slope
        .iter()
        .zip(&minus_fprime)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(TwoDResult {
        node_x,
        avg_slope,
        minus_fprime,
        gap,
    })
}
