//! Replication-level point estimates and Student-t confidence intervals.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean of independent replication outputs with a 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error of the mean; `None` with fewer than two samples.
    pub std_err: Option<f64>,
    /// Half-width of the two-sided 95% Student-t interval.
    pub ci95: Option<f64>,
    pub samples: usize,
}

impl Estimate {
    /// Aggregates in slice order, so the result is bit-reproducible for a
    /// fixed ordering of replications.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = if n == 0 { f64::NAN } else { xs.iter().sum::<f64>() / n as f64 };
        if n < 2 {
            return Self { mean, std_err: None, ci95: None, samples: n };
        }
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("degrees of freedom are positive").inverse_cdf(0.975);
        Self { mean, std_err: Some(se), ci95: Some(t * se), samples: n }
    }

    /// Whether `value` lies inside the 95% interval. A single sample has no
    /// interval and covers nothing.
    pub fn covers(&self, value: f64) -> bool {
        self.ci95.is_some_and(|hw| (value - self.mean).abs() <= hw)
    }

    /// `(value - mean) / std_err`.
    pub fn z_score(&self, value: f64) -> Option<f64> {
        self.std_err.map(|se| (value - self.mean) / se)
    }

    /// Whether `value` is within `k` standard errors of the mean.
    pub fn within_se(&self, value: f64, k: f64) -> bool {
        self.std_err.is_some_and(|se| (value - self.mean).abs() <= k * se)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_has_no_interval() {
        let e = Estimate::from_samples(&[2.0]);
        assert_eq!(e.mean, 2.0);
        assert!(e.ci95.is_none());
        assert!(!e.covers(2.0));
    }

    #[test]
    fn t_interval() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((e.std_err.unwrap() - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        // t_{0.975, 3} = 3.182446305284263
        assert!((e.ci95.unwrap() - 3.182446305284263 * (5.0f64 / 12.0).sqrt()).abs() < 1e-9);
        assert!(e.covers(4.5));
        assert!(!e.covers(5.0));
    }
}
