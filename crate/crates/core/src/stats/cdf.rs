use crate::error::{Error, Result};

/// CDF of a density known up to normalization, tabulated on a uniform grid
/// by composite Simpson and evaluated by linear interpolation.
#[derive(Debug, Clone)]
pub struct TabulatedCdf {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl TabulatedCdf {
    /// `cells` is rounded up to an even count. Mass outside `[lo, hi]` is
    /// treated as zero.
    pub fn new<F: Fn(f64) -> f64>(density: F, lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(hi > lo) || cells < 2 {
            return Err(Error::invalid("range", "need hi > lo and at least two cells"));
        }
        let cells = cells + cells % 2;
        let step = (hi - lo) / cells as f64;
        let f: Vec<f64> = (0..=cells).map(|i| density(lo + step * i as f64)).collect();
        let mut values = vec![0.0; cells + 1];
        for i in 1..=cells {
            // trapezoid per cell, then Simpson correction on even nodes
            values[i] = values[i - 1] + 0.5 * step * (f[i - 1] + f[i]);
            if i % 2 == 0 {
                values[i] = values[i - 2] + step / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
            }
        }
        let total = values[cells];
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::invalid("density", "has no finite positive mass"));
        }
        for v in &mut values {
            *v /= total;
        }
        Ok(Self { lo, step, values })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        if pos <= 0.0 {
            return 0.0;
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return 1.0;
        }
        let w = pos - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}
