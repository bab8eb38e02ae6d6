//! Running means, batch-mean errors and weighted least squares.

use serde::{Deserialize, Serialize};

/// Welford running mean and variance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean assuming independent samples.
    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            f64::INFINITY
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// A value with a standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Estimate { value, se }
    }

    /// Mean of independent batch values with the standard error of that mean.
    pub fn from_batches(batches: &[f64]) -> Self {
        let mut acc = Accumulator::new();
        for &b in batches {
            acc.push(b);
        }
        Estimate::new(acc.mean(), acc.std_error())
    }

    /// `|self − other|` in units of the combined standard error.
    pub fn z_distance(&self, other: &Estimate) -> f64 {
        let s = (self.se * self.se + other.se * other.se).sqrt();
        (self.value - other.value).abs() / s
    }
}

/// Splits a correlated series into `batches` contiguous blocks and returns
/// the overall mean with the batch-means standard error.
pub fn batch_means(series: &[f64], batches: usize) -> Estimate {
    let batches = batches.max(2).min(series.len().max(1));
    let len = series.len() / batches;
    if len == 0 {
        return Estimate::new(series.iter().sum::<f64>() / series.len().max(1) as f64, f64::INFINITY);
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| series[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    Estimate::from_batches(&means)
}

/// Normal-approximation standard error of a binomial proportion; uses
/// `p = 1/(2n)` when no successes or failures were seen so the error is
/// never reported as zero.
pub fn proportion(successes: u64, trials: u64) -> Estimate {
    let n = trials.max(1) as f64;
    let p = successes as f64 / n;
    let pe = p.clamp(0.5 / n, 1.0 - 0.5 / n);
    Estimate::new(p, (pe * (1.0 - pe) / n).sqrt())
}

/// Result of a weighted straight-line fit `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    /// Weighted residual sum of squares.
    pub chi2: f64,
    pub points: usize,
}

impl LinearFit {
    pub fn reduced_chi2(&self) -> f64 {
        if self.points > 2 {
            self.chi2 / (self.points - 2) as f64
        } else {
            f64::NAN
        }
    }
}

/// Weighted least squares with weights `1/σ²`. Returns `None` with fewer than
/// two points or a degenerate design. Parameter errors come from the inverse
/// normal matrix (the `σ` are taken as absolute).
pub fn weighted_linear_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> Option<LinearFit> {
    assert!(x.len() == y.len() && y.len() == sigma.len());
    if x.len() < 2 {
        return None;
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let w = 1.0 / (sigma[i] * sigma[i]);
        if !w.is_finite() {
            return None;
        }
        s += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
    }
    let det = s * sxx - sx * sx;
    if det.abs() <= 1e-12 * s * sxx {
        return None;
    }
    let slope = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2 = (0..x.len())
        .map(|i| ((y[i] - intercept - slope * x[i]) / sigma[i]).powi(2))
        .sum();
    Some(LinearFit {
        slope,
        intercept,
        slope_se: (s / det).sqrt(),
        intercept_se: (sxx / det).sqrt(),
        chi2,
        points: x.len(),
    })
}

/// Jackknife error for a statistic evaluated on all blocks (`full`) and on
/// every leave-one-block-out subset.
pub fn jackknife(full: f64, leave_one_out: &[f64]) -> Estimate {
    let b = leave_one_out.len();
    if b < 2 {
        return Estimate::new(full, f64::INFINITY);
    }
    let mean = leave_one_out.iter().sum::<f64>() / b as f64;
    let ss: f64 = leave_one_out.iter().map(|t| (t - mean).powi(2)).sum();
    Estimate::new(full, (ss * (b - 1) as f64 / b as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_matches_two_pass() {
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0, 7.0];
        let mut a = Accumulator::new();
        xs.iter().for_each(|&x| a.push(x));
        let mean = xs.iter().sum::<f64>() / 6.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((a.mean() - mean).abs() < 1e-14);
        assert!((a.variance() - var).abs() < 1e-12);

        let mut left = Accumulator::new();
        let mut right = Accumulator::new();
        xs[..2].iter().for_each(|&x| left.push(x));
        xs[2..].iter().for_each(|&x| right.push(x));
        left.merge(&right);
        assert!((left.mean() - mean).abs() < 1e-14);
        assert!((left.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn exact_line_is_recovered() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 0.25 * v).collect();
        let f = weighted_linear_fit(&x, &y, &[0.1; 4]).unwrap();
        assert!((f.slope + 0.25).abs() < 1e-12);
        assert!((f.intercept - 1.5).abs() < 1e-12);
        assert!(f.chi2 < 1e-20);
        // unweighted slope error for equal sigma: σ / sqrt(Σ(x - x̄)²)
        assert!((f.slope_se - 0.1 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fit_is_none() {
        assert!(weighted_linear_fit(&[1.0], &[2.0], &[1.0]).is_none());
        assert!(weighted_linear_fit(&[1.0, 1.0], &[2.0, 3.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn proportion_never_has_zero_error() {
        let e = proportion(0, 100);
        assert_eq!(e.value, 0.0);
        assert!(e.se > 0.0);
    }

    #[test]
    fn batch_means_of_constant_series() {
        let e = batch_means(&[2.0; 100], 10);
        assert_eq!(e.value, 2.0);
        assert_eq!(e.se, 0.0);
    }

    #[test]
    fn jackknife_of_mean_matches_standard_error() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        let n = x.len() as f64;
        let full = x.iter().sum::<f64>() / n;
        let loo: Vec<f64> = (0..x.len())
            .map(|i| (x.iter().sum::<f64>() - x[i]) / (n - 1.0))
            .collect();
        let j = jackknife(full, &loo);
        let b = Estimate::from_batches(&x);
        assert!((j.se - b.se).abs() < 1e-12);
    }
}
