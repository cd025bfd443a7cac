//! Adiabatic metadynamics on the circle in its Fourier representation.
//!
//! The total potential `Φ_t = F − mean F + Ψ_t` seen by `Z_t` is kept as its
//! first `N` Fourier modes `(α_k, β_k)`. Deposition adds `γ cos(kZ)` and
//! `γ sin(kZ)` per unit time to each mode, so `Φ_t` keeps zero mean.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_positive, Error, Result};

/// Reduces an angle to `[−π, π)`.
pub fn wrap(z: f64) -> f64 {
    if (-PI..PI).contains(&z) {
        return z;
    }
    let r = (z + PI).rem_euclid(2.0 * PI) - PI;
    if r >= PI {
        -PI
    } else {
        r
    }
}

/// Fills `c[k−1] = cos(kz)` and `s[k−1] = sin(kz)` for `k = 1..=n` by the
/// angle-addition recurrence.
fn harmonics(z: f64, c: &mut [f64], s: &mut [f64]) {
    let n = c.len();
    if n == 0 {
        return;
    }
    let (s1, c1) = z.sin_cos();
    c[0] = c1;
    s[0] = s1;
    for k in 1..n {
        c[k] = c[k - 1] * c1 - s[k - 1] * s1;
        s[k] = s[k - 1] * c1 + c[k - 1] * s1;
    }
}

/// `F(z) = offset + Σ_k a_k cos kz + b_k sin kz`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPotential {
    pub cos_coeffs: Vec<f64>,
    pub sin_coeffs: Vec<f64>,
    /// Mean of `F` over the circle.
    pub offset: f64,
}

impl TrigPotential {
    pub fn new(cos_coeffs: Vec<f64>, sin_coeffs: Vec<f64>, offset: f64) -> Result<Self> {
        let all = cos_coeffs.iter().chain(&sin_coeffs).chain(std::iter::once(&offset));
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("F", "coefficients must be finite"));
        }
        let n = cos_coeffs.len().max(sin_coeffs.len());
        let mut a = cos_coeffs;
        let mut b = sin_coeffs;
        a.resize(n, 0.0);
        b.resize(n, 0.0);
        Ok(Self {
            cos_coeffs: a,
            sin_coeffs: b,
            offset,
        })
    }

    pub fn zero() -> Self {
        Self {
            cos_coeffs: Vec::new(),
            sin_coeffs: Vec::new(),
            offset: 0.0,
        }
    }

    /// `cos 2z + 0.5 sin z`.
    pub fn reference() -> Self {
        Self::new(vec![0.0, 1.0], vec![0.5, 0.0], 0.0).expect("finite")
    }

    /// Highest mode with a non-zero coefficient.
    pub fn degree(&self) -> usize {
        (0..self.cos_coeffs.len())
            .rev()
            .find(|&k| self.cos_coeffs[k] != 0.0 || self.sin_coeffs[k] != 0.0)
            .map_or(0, |k| k + 1)
    }

    pub fn mean(&self) -> f64 {
        self.offset
    }

    pub fn value(&self, z: f64) -> f64 {
        let n = self.cos_coeffs.len();
        let (mut c, mut s) = (vec![0.0; n], vec![0.0; n]);
        harmonics(z, &mut c, &mut s);
        self.offset
            + (0..n)
                .map(|k| self.cos_coeffs[k] * c[k] + self.sin_coeffs[k] * s[k])
                .sum::<f64>()
    }

    pub fn derivative(&self, z: f64) -> f64 {
        let n = self.cos_coeffs.len();
        let (mut c, mut s) = (vec![0.0; n], vec![0.0; n]);
        harmonics(z, &mut c, &mut s);
        (0..n)
            .map(|k| (k + 1) as f64 * (self.sin_coeffs[k] * c[k] - self.cos_coeffs[k] * s[k]))
            .sum()
    }

    /// Modes above `n`, with zero mean.
    fn above(&self, n: usize) -> Option<Self> {
        if self.degree() <= n {
            return None;
        }
        let mut a = self.cos_coeffs.clone();
        let mut b = self.sin_coeffs.clone();
        a[..n].fill(0.0);
        b[..n].fill(0.0);
        Some(Self {
            cos_coeffs: a,
            sin_coeffs: b,
            offset: 0.0,
        })
    }
}

/// The first `N` Fourier modes of `Φ_t` with the deposition parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierBias {
    pub alpha: Vec<f64>,
    pub beta_coef: Vec<f64>,
    /// Deposition rate `γ ≥ 0`.
    pub gamma: f64,
    /// Inverse temperature `β`; `+∞` switches the noise off.
    pub inv_temp: f64,
}

impl FourierBias {
    pub fn new(order: usize, gamma: f64, inv_temp: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("N", "truncation order must be at least 1"));
        }
        if !(gamma >= 0.0) || gamma.is_infinite() {
            return Err(Error::invalid("gamma", format!("must be finite and non-negative, got {gamma}")));
        }
        ensure_positive("beta", inv_temp)?;
        Ok(Self {
            alpha: vec![0.0; order],
            beta_coef: vec![0.0; order],
            gamma,
            inv_temp,
        })
    }

    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    /// `Φ(z) = Σ α_k cos kz + β_k sin kz`.
    pub fn bias_value(&self, z: f64) -> f64 {
        let n = self.order();
        let (mut c, mut s) = (vec![0.0; n], vec![0.0; n]);
        harmonics(z, &mut c, &mut s);
        (0..n).map(|k| self.alpha[k] * c[k] + self.beta_coef[k] * s[k]).sum()
    }

    /// `Φ'(z)`.
    pub fn bias_grad(&self, z: f64) -> f64 {
        let n = self.order();
        let (mut c, mut s) = (vec![0.0; n], vec![0.0; n]);
        harmonics(z, &mut c, &mut s);
        (0..n)
            .map(|k| (k + 1) as f64 * (self.beta_coef[k] * c[k] - self.alpha[k] * s[k]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusState {
    pub z: f64,
    pub bias: FourierBias,
    pub t: f64,
    /// Left-endpoint integrals `∫_0^t α_s ds` and `∫_0^t β_s ds`.
    pub alpha_integral: Vec<f64>,
    pub beta_integral: Vec<f64>,
    potential: TrigPotential,
    residual: Option<TrigPotential>,
    cos_buf: Vec<f64>,
    sin_buf: Vec<f64>,
}

/// Starts from `Φ_0 = F − mean F` at angle `z0`. Fails when `F` has modes
/// above `N` unless `allow_violation` is set, in which case those modes stay
/// frozen in the drift.
pub fn init_from_potential(
    potential: &TrigPotential,
    order: usize,
    gamma: f64,
    inv_temp: f64,
    z0: f64,
    allow_violation: bool,
) -> Result<TorusState> {
    let degree = potential.degree();
    if degree > order && !allow_violation {
        return Err(Error::TruncationTooLow { order, degree });
    }
    if !z0.is_finite() {
        return Err(Error::invalid("z0", "must be finite"));
    }
    let mut bias = FourierBias::new(order, gamma, inv_temp)?;
    for k in 0..order.min(potential.cos_coeffs.len()) {
        bias.alpha[k] = potential.cos_coeffs[k];
        bias.beta_coef[k] = potential.sin_coeffs[k];
    }
    Ok(TorusState {
        z: wrap(z0),
        bias,
        t: 0.0,
        alpha_integral: vec![0.0; order],
        beta_integral: vec![0.0; order],
        potential: potential.clone(),
        residual: potential.above(order),
        cos_buf: vec![0.0; order],
        sin_buf: vec![0.0; order],
    })
}

impl TorusState {
    pub fn potential(&self) -> &TrigPotential {
        &self.potential
    }

    /// Time averages `(1/t)∫α`, `(1/t)∫β`.
    pub fn averages(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(self.t > 0.0) {
            return Err(Error::invalid("t", "averages need t > 0"));
        }
        let t = self.t;
        Ok((
            self.alpha_integral.iter().map(|v| v / t).collect(),
            self.beta_integral.iter().map(|v| v / t).collect(),
        ))
    }

    /// One Euler–Maruyama step with the standard normal draw `noise`. The
    /// coefficient updates use the angle before the move.
    pub fn step_em(&mut self, dt: f64, noise: f64) -> Result<()> {
        if !(dt > 0.0) || dt.is_infinite() {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        self.step_unchecked(dt, noise);
        Ok(())
    }

    #[inline]
    fn step_unchecked(&mut self, dt: f64, noise: f64) {
        let n = self.bias.order();
        harmonics(self.z, &mut self.cos_buf, &mut self.sin_buf);
        let b = &mut self.bias;
        let mut drift = 0.0;
        for k in 0..n {
            let (c, s) = (self.cos_buf[k], self.sin_buf[k]);
            drift += (k + 1) as f64 * (b.alpha[k] * s - b.beta_coef[k] * c);
            self.alpha_integral[k] += b.alpha[k] * dt;
            self.beta_integral[k] += b.beta_coef[k] * dt;
            b.alpha[k] += b.gamma * c * dt;
            b.beta_coef[k] += b.gamma * s * dt;
        }
        if let Some(r) = &self.residual {
            drift -= r.derivative(self.z);
        }
        let sigma = (2.0 * dt / b.inv_temp).sqrt();
        self.z = wrap(self.z + drift * dt + sigma * noise);
        self.t += dt;
    }

    /// `(1/t)∫_0^t Ψ_s(z) ds` on `grid`, using `Ψ = Φ − (F − mean F)`.
    pub fn averaged_penalty(&self, grid: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = self.averages()?;
        let avg = FourierBias {
            alpha: a,
            beta_coef: b,
            ..self.bias.clone()
        };
        let mean = self.potential.mean();
        Ok(grid
            .iter()
            .map(|&z| {
                let frozen = self.residual.as_ref().map_or(0.0, |r| r.value(z));
                avg.bias_value(z) + frozen - (self.potential.value(z) - mean)
            })
            .collect())
    }
}

/// Snapshots of `(Z, α, β)` taken every `stride` steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TorusTrace {
    pub order: usize,
    pub z: Vec<f64>,
    /// Row-major `samples × N`.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl TorusTrace {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    fn push(&mut self, s: &TorusState) {
        self.z.push(s.z);
        self.alpha.extend_from_slice(&s.bias.alpha);
        self.beta.extend_from_slice(&s.bias.beta_coef);
    }
}

/// Runs `round(horizon / dt)` steps, recording a snapshot every `stride`
/// steps (`stride = 0` records nothing).
pub fn run<R: Rng + ?Sized>(
    state: &mut TorusState,
    dt: f64,
    horizon: f64,
    stride: usize,
    rng: &mut R,
) -> Result<TorusTrace> {
    ensure_positive("dt", dt)?;
    ensure_positive("horizon", horizon)?;
    let steps = (horizon / dt).round() as u64;
    let mut trace = TorusTrace {
        order: state.bias.order(),
        ..Default::default()
    };
    for i in 1..=steps {
        let xi: f64 = StandardNormal.sample(rng);
        state.step_unchecked(dt, xi);
        if stride > 0 && i % stride as u64 == 0 {
            trace.push(state);
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusMoments {
    pub mean_alpha: Vec<f64>,
    pub var_alpha: Vec<f64>,
    pub mean_beta: Vec<f64>,
    pub var_beta: Vec<f64>,
    /// Counts of `Z` in equal bins over `[−π, π)`.
    pub z_histogram: Vec<u64>,
}

/// Per-mode sample means and variances and a `bins`-bin histogram of `Z`.
pub fn invariant_moments(trace: &TorusTrace, bins: usize) -> Result<TorusMoments> {
    let m = trace.len();
    if m < 2 {
        return Err(Error::InsufficientData {
            what: "trace samples",
            needed: 2,
            got: m,
        });
    }
    let n = trace.order;
    let column = |data: &[f64], k: usize| -> (f64, f64) {
        let col: Vec<f64> = (0..m).map(|i| data[i * n + k]).collect();
        crate::stats::mean_var(&col)
    };
    let (mut ma, mut va, mut mb, mut vb) = (vec![], vec![], vec![], vec![]);
    for k in 0..n {
        let (m1, v1) = column(&trace.alpha, k);
        let (m2, v2) = column(&trace.beta, k);
        ma.push(m1);
        va.push(v1);
        mb.push(m2);
        vb.push(v2);
    }
    Ok(TorusMoments {
        mean_alpha: ma,
        var_alpha: va,
        mean_beta: mb,
        var_beta: vb,
        z_histogram: crate::stats::histogram(&trace.z, -PI, PI, bins),
    })
}
