use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean of a set of seed-level values with its two-sided 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// `None` with fewer than two values.
    pub half_width: Option<f64>,
}

impl Summary {
    pub fn ci_low(&self) -> Option<f64> {
        self.half_width.map(|h| self.mean - h)
    }

    pub fn ci_high(&self) -> Option<f64> {
        self.half_width.map(|h| self.mean + h)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Student-t 95% interval over `values`.
pub fn summarize(values: &[f64]) -> Summary {
    let m = mean(values);
    let n = values.len();
    if n < 2 {
        return Summary { mean: m, half_width: None };
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    let se = (variance(values) / n as f64).sqrt();
    Summary {
        mean: m,
        half_width: Some(t * se),
    }
}

/// One-sided Welch t-test p-value for `mean(a) > mean(b)`.
pub fn welch_greater(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (va, vb) = (variance(a) / a.len() as f64, variance(b) / b.len() as f64);
    let se2 = va + vb;
    let diff = mean(a) - mean(b);
    if se2 == 0.0 {
        return Some(if diff > 0.0 { 0.0 } else { 1.0 });
    }
    let df = se2 * se2 / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    let t = diff / se2.sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some(1.0 - dist.cdf(t))
}
