use crate::error::{Error, Result};

/// Batch-means estimator of the asymptotic variance `c_f` of a time
/// average, for observables that are piecewise linear in time.
///
/// The horizon is split into equal-duration batches; with batch length `b`
/// and batch averages `m_1..m_B`, `c_f ≈ b · Var(m)` and the standard error
/// of the overall mean is `sqrt(c_f / horizon)`.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    batch_len: f64,
    integrals: Vec<f64>,
    elapsed: f64,
    current: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchEstimate {
    pub mean: f64,
    /// Asymptotic variance of `sqrt(t) · (time average − mean)`.
    pub asymptotic_variance: f64,
    pub std_error: f64,
    pub batch_averages: Vec<f64>,
}

impl BatchMeans {
    pub fn new(horizon: f64, batches: usize) -> Self {
        assert!(horizon > 0.0 && batches >= 2);
        Self {
            batch_len: horizon / batches as f64,
            integrals: vec![0.0; batches],
            elapsed: 0.0,
            current: 0,
        }
    }

    pub fn batches(&self) -> usize {
        self.integrals.len()
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    /// Splits a segment of length `duration` at batch boundaries and adds
    /// `integral(offset, len)` of each piece to its batch.
    fn push_pieces<I: Fn(f64, f64) -> f64>(&mut self, duration: f64, integral: I) {
        let last = self.integrals.len() - 1;
        let mut offset = 0.0;
        while offset < duration {
            let batch = self.current;
            let room = if batch == last {
                f64::INFINITY
            } else {
                (batch + 1) as f64 * self.batch_len - self.elapsed
            };
            if room <= 0.0 {
                self.current += 1;
                continue;
            }
            let piece = (duration - offset).min(room);
            self.integrals[batch] += integral(offset, piece);
            offset += piece;
            self.elapsed += piece;
        }
    }

    /// Adds a segment on which the observable starts at `start` and moves
    /// with constant `slope` for `duration`.
    pub fn push_linear(&mut self, start: f64, slope: f64, duration: f64) {
        self.push_pieces(duration, |off, len| {
            let v0 = start + slope * off;
            len * (v0 + 0.5 * slope * len)
        });
    }

    /// Adds a segment for an observable given by `value(offset)`, integrated
    /// with Simpson's rule on each piece (exact up to cubics).
    pub fn push_fn<F: Fn(f64) -> f64>(&mut self, duration: f64, value: F) {
        self.push_pieces(duration, |off, len| {
            len / 6.0 * (value(off) + 4.0 * value(off + 0.5 * len) + value(off + len))
        });
    }

    pub fn push_constant(&mut self, value: f64, duration: f64) {
        self.push_linear(value, 0.0, duration);
    }

    pub fn estimate(&self) -> BatchEstimate {
        let b = self.batch_len;
        let averages: Vec<f64> = self.integrals.iter().map(|s| s / b).collect();
        let n = averages.len() as f64;
        let mean = averages.iter().sum::<f64>() / n;
        let var = averages.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1.0);
        let asymptotic_variance = b * var;
        BatchEstimate {
            mean,
            asymptotic_variance,
            std_error: (asymptotic_variance / (b * n)).sqrt(),
            batch_averages: averages,
        }
    }
}

/// Batch-means estimate from a series of `(value, duration)` pieces. At
/// least four pieces per batch are required.
pub fn batch_means(series: &[(f64, f64)], batches: usize) -> Result<BatchEstimate> {
    if batches < 2 || series.len() < 4 * batches {
        return Err(Error::InsufficientData {
            what: "segments",
            needed: 4 * batches.max(2),
            got: series.len(),
        });
    }
    let horizon: f64 = series.iter().map(|p| p.1).sum();
    let mut acc = BatchMeans::new(horizon, batches);
    for &(v, d) in series {
        acc.push_constant(v, d);
    }
    Ok(acc.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_series_has_zero_variance() {
        let series = vec![(2.5, 0.3); 400];
        let e = batch_means(&series, 32).unwrap();
        assert!((e.mean - 2.5).abs() < 1e-12);
        assert!(e.asymptotic_variance < 1e-20);
    }

    #[test]
    fn iid_series_recovers_variance() {
        let sigma = 1.7;
        let mut rng = derive_stream(42, 0);
        let series: Vec<(f64, f64)> = (0..100_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (sigma * z, 1.0)
            })
            .collect();
        let e = batch_means(&series, 128).unwrap();
        let rel = e.asymptotic_variance / (sigma * sigma) - 1.0;
        assert!(rel.abs() < 0.25, "relative error {rel}");
    }

    #[test]
    fn batch_count_self_consistency() {
        let mut rng = derive_stream(43, 0);
        // AR(1) series, correlated like a sampled trajectory
        let mut x = 0.0;
        let series: Vec<(f64, f64)> = (0..100_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = 0.9 * x + z;
                (x, 1.0)
            })
            .collect();
        let est: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&b| batch_means(&series, b).unwrap().asymptotic_variance)
            .collect();
        let (lo, hi) = est.iter().fold((f64::MAX, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(hi / lo < 2.0, "{est:?}");
    }

    #[test]
    fn too_few_segments() {
        let series = vec![(1.0, 1.0); 10];
        assert!(matches!(
            batch_means(&series, 32),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn linear_pieces_split_exactly_at_boundaries() {
        let mut acc = BatchMeans::new(4.0, 2);
        // value t on [0, 4]: batch integrals 2 and 6
        acc.push_linear(0.0, 1.0, 4.0);
        let e = acc.estimate();
        assert!((e.batch_averages[0] - 1.0).abs() < 1e-14);
        assert!((e.batch_averages[1] - 3.0).abs() < 1e-14);
    }
}
