//! Statistical and numerical utilities shared by the simulators and their
//! checks.

mod batch;
mod cdf;
mod ks;
mod quadrature;

pub use batch::{batch_means, BatchEstimate, BatchMeans};
pub use cdf::TabulatedCdf;
pub use ks::{
    chi_square_uniform, kolmogorov_survival, ks_one_sample, ks_two_sample, ChiSquareTest,
    KsResult, WeightedSample,
};
pub use quadrature::{adaptive_simpson, integrate, DEFAULT_REL_TOL};

/// Largest absolute gap between `grad` and central finite differences of
/// `value`, over the supplied points.
pub fn max_fd_error<F, G>(value: F, grad: G, points: &[f64], h: f64) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    points
        .iter()
        .map(|&x| {
            let fd = (value(x + h) - value(x - h)) / (2.0 * h);
            (fd - grad(x)).abs()
        })
        .fold(0.0, f64::max)
}

/// Counts of `values` in `bins` equal-width bins over `[lo, hi)`; values
/// outside the range are ignored.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        if v >= lo && v < hi {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    counts
}

/// Sample mean and unbiased variance.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
