//! Sample statistics. Everything here is `f64`, whatever the field scalar.

use serde::{Deserialize, Serialize};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Estimate { mean: f64::NAN, se: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        if values.len() == 1 {
            return Estimate { mean, se: f64::INFINITY };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate {
            mean,
            se: (var / n).sqrt(),
        }
    }

    /// Deterministic quantity with no sampling error.
    pub fn exact(mean: f64) -> Self {
        Estimate { mean, se: 0.0 }
    }

    /// `|a - b|` in units of the combined standard error.
    pub fn z_distance(&self, other: &Estimate) -> f64 {
        let se = self.se.hypot(other.se);
        let diff = (self.mean - other.mean).abs();
        if se == 0.0 {
            if diff == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            diff / se
        }
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        (self.mean - target).abs() <= n_se * self.se
    }
}

/// Summary of a sample: mean, unbiased variance and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub max: f64,
    pub se: f64,
}

impl Summary {
    pub fn from_samples(values: &[f64]) -> Self {
        let est = Estimate::from_samples(values);
        let n = values.len() as f64;
        let variance = if values.len() > 1 { est.se * est.se * n } else { 0.0 };
        Summary {
            count: values.len(),
            mean: est.mean,
            variance,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            se: est.se,
        }
    }
}

/// `log Σ exp(x_i)`, `-∞` for an empty or all-`-∞` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log of the mean of `exp(l_i)` with jackknife error, computed without
/// leaving log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogMean {
    pub log_mean: f64,
    pub se: f64,
    /// Largest single term divided by the total, `0` when every term vanishes.
    pub max_share: f64,
    pub nonzero: usize,
}

pub fn jackknife_log_mean(log_weights: &[f64]) -> LogMean {
    let n = log_weights.len();
    let lse = log_sum_exp(log_weights);
    let nonzero = log_weights.iter().filter(|l| **l > f64::NEG_INFINITY).count();
    if n == 0 || lse == f64::NEG_INFINITY {
        return LogMean {
            log_mean: f64::NEG_INFINITY,
            se: 0.0,
            max_share: 0.0,
            nonzero,
        };
    }
    let nf = n as f64;
    let log_mean = lse - nf.ln();
    let (imax, lmax) = log_weights
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, l)| if l > acc.1 { (i, l) } else { acc });
    let max_share = (lmax - lse).exp();
    if nonzero < 2 || n < 2 {
        return LogMean {
            log_mean,
            se: f64::INFINITY,
            max_share,
            nonzero,
        };
    }
    let norm = (nf - 1.0).ln();
    // The dominant term is removed by summing the rest directly; for every
    // other term its share is at most one half and log1p is accurate.
    let without_max = {
        let rest: Vec<f64> = log_weights
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != imax)
            .map(|(_, l)| *l)
            .collect();
        log_sum_exp(&rest)
    };
    let loo: Vec<f64> = log_weights
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let total = if i == imax {
                without_max
            } else if l == f64::NEG_INFINITY {
                lse
            } else {
                lse + (-(l - lse).exp()).ln_1p()
            };
            total - norm
        })
        .collect();
    let avg = loo.iter().sum::<f64>() / nf;
    let var = loo.iter().map(|v| (v - avg).powi(2)).sum::<f64>() * (nf - 1.0) / nf;
    LogMean {
        log_mean,
        se: var.sqrt(),
        max_share,
        nonzero,
    }
}

/// Ordinary least squares `y ≈ a + b x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "fit needs two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LinearFit {
        slope,
        intercept,
        slope_se,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lse_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        let big = log_sum_exp(&[1000.0, 1000.0]);
        assert!((big - 1000.0 - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn jackknife_matches_linear_scale_delta_method() {
        let w: Vec<f64> = (0..200).map(|i| 1.0 + 0.5 * ((i as f64) * 0.37).sin()).collect();
        let logs: Vec<f64> = w.iter().map(|v| v.ln()).collect();
        let j = jackknife_log_mean(&logs);
        let e = Estimate::from_samples(&w);
        assert!((j.log_mean - e.mean.ln()).abs() < 1e-12);
        // For the mean, the jackknife reproduces the classical standard error.
        assert!((j.se - e.se / e.mean).abs() < 1e-3 * j.se);
    }

    #[test]
    fn dominated_sample_stays_finite() {
        let mut logs = vec![0.0; 100];
        logs[17] = 800.0;
        let j = jackknife_log_mean(&logs);
        assert!(j.log_mean.is_finite() && j.se.is_finite());
        assert!(j.max_share > 0.999);
    }

    #[test]
    fn empty_and_singleton() {
        let j = jackknife_log_mean(&[f64::NEG_INFINITY; 4]);
        assert_eq!(j.log_mean, f64::NEG_INFINITY);
        assert_eq!(j.max_share, 0.0);
        let j = jackknife_log_mean(&[f64::NEG_INFINITY, 0.3, f64::NEG_INFINITY]);
        assert_eq!(j.se, f64::INFINITY);
        assert_eq!(j.max_share, 1.0);
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 - 3.0 * v).collect();
        let f = linear_fit(&x, &y);
        assert!((f.slope + 3.0).abs() < 1e-14 && (f.intercept - 2.5).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn log_mean_is_finite_or_sentinel(logs in proptest::collection::vec(prop_oneof![Just(f64::NEG_INFINITY), -1e4f64..1e4], 1..50)) {
            let j = jackknife_log_mean(&logs);
            prop_assert!(j.log_mean.is_finite() || j.log_mean == f64::NEG_INFINITY);
            prop_assert!((0.0..=1.0).contains(&j.max_share));
        }
    }
}
