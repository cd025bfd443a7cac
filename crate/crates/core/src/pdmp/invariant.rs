use super::{Landscape, SimParams};
use crate::error::{Error, Result};
use crate::stats::{adaptive_simpson, integrate, TabulatedCdf};

/// One-coordinate marginal of the invariant law,
/// `∝ exp(−(2/(βγ)) cosh(β(y + A'_k)))`.
///
/// Evaluated as `exp(−(4/(βγ)) sinh²(β u / 2))` with `u = y + A'_k`, which
/// differs by a constant factor and does not underflow when `βγ` is small.
#[derive(Debug, Clone)]
pub struct MarginalDensity {
    beta: f64,
    coef: f64,
    shift: f64,
    log_norm: f64,
    half_width: f64,
}

impl MarginalDensity {
    pub fn new(inv_temp: f64, deposition: f64, shift: f64) -> Result<Self> {
        let coef = 4.0 / (inv_temp * deposition);
        // exp(-60) relative to the peak at the cut-off
        let half_width = 2.0 * (60.0 / coef).sqrt().asinh() / inv_temp;
        let shape = |u: f64| {
            let s = (0.5 * inv_temp * u).sinh();
            (-coef * s * s).exp()
        };
        let h = half_width;
        let z = integrate(shape, &[-h, -0.5 * h, 0.0, 0.5 * h, h])?;
        Ok(Self {
            beta: inv_temp,
            coef,
            shift,
            log_norm: z.ln(),
            half_width,
        })
    }

    /// Marginal of edge `k` (1-based) in `landscape`.
    pub fn for_edge(edge: usize, landscape: &Landscape, params: &SimParams) -> Result<Self> {
        Self::new(params.inv_temp, params.deposition, landscape.increment(edge))
    }

    pub fn log_pdf(&self, y: f64) -> f64 {
        let s = (0.5 * self.beta * (y + self.shift)).sinh();
        -self.coef * s * s - self.log_norm
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.log_pdf(y).exp()
    }

    pub fn mode(&self) -> f64 {
        -self.shift
    }

    /// Interval outside of which the density is below `e^{-60}` of its peak.
    pub fn support(&self) -> (f64, f64) {
        (self.mode() - self.half_width, self.mode() + self.half_width)
    }

    pub fn tabulated_cdf(&self, cells: usize) -> Result<TabulatedCdf> {
        let (lo, hi) = self.support();
        TabulatedCdf::new(|y| self.pdf(y), lo, hi, cells)
    }
}

/// Normalized density of `X(k)` at `y` under the invariant law.
pub fn invariant_marginal_density(
    edge: usize,
    y: f64,
    landscape: &Landscape,
    params: &SimParams,
) -> Result<f64> {
    Ok(MarginalDensity::for_edge(edge, landscape, params)?.pdf(y))
}

/// Smooth test function `f(x, site)` with access to its partial
/// derivatives in the edge variables.
pub trait TestFunction {
    fn value(&self, x: &[f64], site: usize) -> f64;
    /// `∂f/∂x_k` for the 1-based edge `k`.
    fn partial(&self, x: &[f64], site: usize, edge: usize) -> f64;
}

/// Applies the generator of the discrete metadynamics literally:
///
/// `Lf(x,k) = γ(1{k>0} ∂_{x_k} f − 1{k<K} ∂_{x_{k+1}} f)
///           + 1{k<K} e^{−β(x_{k+1}+A'_{k+1})} (f(x,k+1) − f(x,k))
///           + 1{k>0} e^{β(x_k+A'_k)} (f(x,k−1) − f(x,k))`.
pub fn generator_apply<T: TestFunction + ?Sized>(
    f: &T,
    x: &[f64],
    site: usize,
    landscape: &Landscape,
    params: &SimParams,
) -> f64 {
    let kmax = landscape.edges();
    let (beta, gamma) = (params.inv_temp, params.deposition);
    let here = f.value(x, site);
    let mut out = 0.0;
    if site > 0 {
        out += gamma * f.partial(x, site, site);
        let rate = (beta * (x[site - 1] + landscape.increment(site))).exp();
        out += rate * (f.value(x, site - 1) - here);
    }
    if site < kmax {
        out -= gamma * f.partial(x, site, site + 1);
        let rate = (-beta * (x[site] + landscape.increment(site + 1))).exp();
        out += rate * (f.value(x, site + 1) - here);
    }
    out
}

fn nested(
    g: &dyn Fn(&[f64]) -> f64,
    prefix: &[f64],
    ranges: &[(f64, f64)],
    rel_tol: f64,
) -> Result<f64> {
    let Some(&(lo, hi)) = ranges.first() else {
        return Ok(g(prefix));
    };
    let inner = |v: f64| {
        let mut p = prefix.to_vec();
        p.push(v);
        nested(g, &p, &ranges[1..], rel_tol).unwrap_or(f64::NAN)
    };
    let mid = 0.5 * (lo + hi);
    let v = adaptive_simpson(&inner, lo, mid, rel_tol)? + adaptive_simpson(&inner, mid, hi, rel_tol)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::QuadratureDiverged { a: lo, b: hi })
    }
}

/// `∫ g dμ` under the invariant law by tensor-product adaptive quadrature
/// (sum over sites, nested Simpson over each edge coordinate). Intended for
/// `K ≤ 2`; the cost grows geometrically with `K`.
pub fn invariant_expectation<G>(g: G, landscape: &Landscape, params: &SimParams) -> Result<f64>
where
    G: Fn(&[f64], usize) -> f64,
{
    let kmax = landscape.edges();
    let marginals: Vec<MarginalDensity> = (1..=kmax)
        .map(|k| MarginalDensity::for_edge(k, landscape, params))
        .collect::<Result<_>>()?;
    let ranges: Vec<(f64, f64)> = marginals.iter().map(|m| m.support()).collect();
    let rel_tol = if kmax == 1 { 1e-12 } else { 1e-9 };
    let mut total = 0.0;
    for site in 0..=kmax {
        let weighted = |x: &[f64]| {
            let w: f64 = x.iter().zip(&marginals).map(|(&v, m)| m.log_pdf(v)).sum();
            g(x, site) * w.exp()
        };
        total += nested(&weighted, &[], &ranges, rel_tol)?;
    }
    Ok(total / (kmax + 1) as f64)
}

/// `f(x, k) = P_k(Σ x) · Π_e φ((x_e − c_k) / w_k)` with the standard bump
/// `φ(u) = exp(−1/(1−u²))` on `|u| < 1`.
#[derive(Debug, Clone)]
pub struct BumpPolynomial {
    /// Per site: polynomial coefficients (constant first), center, width.
    pub sites: Vec<(Vec<f64>, f64, f64)>,
}

fn bump(u: f64) -> (f64, f64) {
    if u.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let d = 1.0 - u * u;
    let v = (-1.0 / d).exp();
    (v, v * (-2.0 * u / (d * d)))
}

fn poly(coeffs: &[f64], s: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut dv = 0.0;
    for &c in coeffs.iter().rev() {
        dv = dv * s + v;
        v = v * s + c;
    }
    (v, dv)
}

impl TestFunction for BumpPolynomial {
    fn value(&self, x: &[f64], site: usize) -> f64 {
        let (coeffs, c, w) = &self.sites[site];
        let (p, _) = poly(coeffs, x.iter().sum());
        p * x.iter().map(|&v| bump((v - c) / w).0).product::<f64>()
    }

    fn partial(&self, x: &[f64], site: usize, edge: usize) -> f64 {
        let (coeffs, c, w) = &self.sites[site];
        let (p, dp) = poly(coeffs, x.iter().sum());
        let parts: Vec<(f64, f64)> = x.iter().map(|&v| bump((v - c) / w)).collect();
        let others: f64 = parts
            .iter()
            .enumerate()
            .filter(|(e, _)| *e != edge - 1)
            .map(|(_, b)| b.0)
            .product();
        let (b, db) = parts[edge - 1];
        others * (dp * b + p * db / w)
    }
}
