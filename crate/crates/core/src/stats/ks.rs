use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Values with non-negative weights, e.g. segment midpoints weighted by the
/// time a trajectory spent on them.
#[derive(Debug, Clone, Default)]
pub struct WeightedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::invalid(
                "weights",
                format!("length {} differs from values {}", weights.len(), values.len()),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("weights", "must be non-negative"));
        }
        Ok(Self { values, weights })
    }

    pub fn unweighted(values: Vec<f64>) -> Self {
        let weights = vec![1.0; values.len()];
        Self { values, weights }
    }

    pub fn push(&mut self, value: f64, weight: f64) {
        debug_assert!(weight >= 0.0);
        self.values.push(value);
        self.weights.push(weight);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Kish effective sample size `(Σw)² / Σw²`.
    pub fn effective_size(&self) -> f64 {
        let s: f64 = self.weights.iter().sum();
        let s2: f64 = self.weights.iter().map(|w| w * w).sum();
        s * s / s2
    }

    /// Keeps every `stride`-th entry, starting from the first.
    pub fn thinned(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        Self {
            values: self.values.iter().step_by(stride).copied().collect(),
            weights: self.weights.iter().step_by(stride).copied().collect(),
        }
    }

    /// (value, normalized weight) pairs sorted by value.
    fn sorted(&self) -> Result<Vec<(f64, f64)>> {
        let total = self.total_weight();
        if self.is_empty() || !(total > 0.0) {
            return Err(Error::EmptySample);
        }
        let mut pairs: Vec<(f64, f64)> = self
            .values
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| (v, w / total))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(pairs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub effective_size: f64,
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn p_value(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)
}

/// Two-sample Kolmogorov-Smirnov test on weighted empirical CDFs. The
/// p-value uses the asymptotic law with Kish effective sample sizes.
pub fn ks_two_sample(a: &WeightedSample, b: &WeightedSample) -> Result<KsResult> {
    let xa = a.sorted()?;
    let xb = b.sorted()?;
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut d = 0.0f64;
    while i < xa.len() || j < xb.len() {
        let next = match (xa.get(i), xb.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        // consume every tied value before comparing the CDFs
        while i < xa.len() && xa[i].0 == next {
            fa += xa[i].1;
            i += 1;
        }
        while j < xb.len() && xb[j].0 == next {
            fb += xb[j].1;
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    let (na, nb) = (a.effective_size(), b.effective_size());
    let n = na * nb / (na + nb);
    Ok(KsResult {
        statistic: d,
        p_value: p_value(d, n),
        effective_size: n,
    })
}

/// One-sample Kolmogorov-Smirnov test of a weighted sample against a
/// continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(a: &WeightedSample, cdf: F) -> Result<KsResult> {
    let xs = a.sorted()?;
    let mut f = 0.0;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let v = xs[i].0;
        let c = cdf(v);
        d = d.max((c - f).abs());
        while i < xs.len() && xs[i].0 == v {
            f += xs[i].1;
            i += 1;
        }
        d = d.max((c - f).abs());
    }
    let n = a.effective_size();
    Ok(KsResult {
        statistic: d,
        p_value: p_value(d, n),
        effective_size: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of bin counts against the uniform law.
pub fn chi_square_uniform(counts: &[u64]) -> Result<ChiSquareTest> {
    let total: u64 = counts.iter().sum();
    if counts.len() < 2 || total == 0 {
        return Err(Error::EmptySample);
    }
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum::<f64>();
    let dof = counts.len() - 1;
    let law = ChiSquared::new(dof as f64).expect("positive dof");
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: 1.0 - law.cdf(statistic),
    })
}
