use std::path::Path;

use anyhow::{Context, Result};

/// Writes a header and rows as CSV.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that parses back to the same value; exponent
/// form for very small or large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Time-weighted histogram of a piecewise linear path. A segment moving
/// from `x0` to `x1` in time `dt` spreads `dt` over the cells it crosses in
/// proportion to the length covered.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeHistogram {
    lo: f64,
    width: f64,
    mass: Vec<f64>,
    total: f64,
}

impl TimeHistogram {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Self {
        assert!(hi > lo && cells > 0);
        Self {
            lo,
            width: (hi - lo) / cells as f64,
            mass: vec![0.0; cells],
            total: 0.0,
        }
    }

    fn cell(&self, x: f64) -> Option<usize> {
        let i = ((x - self.lo) / self.width).floor();
        (i >= 0.0 && i < self.mass.len() as f64).then_some(i as usize)
    }

    pub fn add(&mut self, x0: f64, x1: f64, dt: f64) {
        if !(dt > 0.0) {
            return;
        }
        self.total += dt;
        let (a, b) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
        if b - a <= 0.0 {
            if let Some(i) = self.cell(a) {
                self.mass[i] += dt;
            }
            return;
        }
        let n = self.mass.len();
        let first = ((a - self.lo) / self.width).floor().max(0.0) as usize;
        if first >= n {
            return;
        }
        let last = (((b - self.lo) / self.width).floor().max(0.0) as usize).min(n - 1);
        for i in first..=last {
            let left = self.lo + i as f64 * self.width;
            let overlap = b.min(left + self.width) - a.max(left);
            if overlap > 0.0 {
                self.mass[i] += dt * overlap / (b - a);
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        for (m, o) in self.mass.iter_mut().zip(&other.mass) {
            *m += o;
        }
        self.total += other.total;
    }

    pub fn centres(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.mass.len()).map(|i| self.lo + (i as f64 + 0.5) * self.width)
    }

    /// Density normalised by total time, including time spent off range.
    pub fn densities(&self) -> Vec<f64> {
        let norm = self.total * self.width;
        self.mass
            .iter()
            .map(|m| if norm > 0.0 { m / norm } else { 0.0 })
            .collect()
    }
}
