//! Service and repair time laws.
//!
//! Every law exposes exact raw moments, its Laplace-Stieltjes transform
//! (LST) `E[exp(-sX)]` on `s >= 0`, closed-form LST derivatives of order one
//! and two, the CDF, and i.i.d. sampling from a caller-supplied stream.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};

/// A service or repair time distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionSpec {
    Exponential {
        rate: f64,
    },
    Erlang {
        shape: u32,
        rate: f64,
    },
    /// Two-branch mixture: with probability `p` the draw is `Exp(rate1)`,
    /// otherwise `Exp(rate2)`.
    HyperExp2 {
        p: f64,
        rate1: f64,
        rate2: f64,
    },
    Deterministic {
        value: f64,
    },
}

use DistributionSpec::*;

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Result<Self> {
        Ok(Exponential { rate: positive("rate", rate)? })
    }

    pub fn erlang(shape: u32, rate: f64) -> Result<Self> {
        if shape == 0 {
            return Err(Error::InvalidParameter("Erlang shape must be at least 1".into()));
        }
        Ok(Erlang { shape, rate: positive("rate", rate)? })
    }

    pub fn hyper_exp2(p: f64, rate1: f64, rate2: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!("mixing probability must lie in (0, 1], got {p}")));
        }
        Ok(HyperExp2 { p, rate1: positive("rate1", rate1)?, rate2: positive("rate2", rate2)? })
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        Ok(Deterministic { value: positive("value", value)? })
    }

    /// Exponential law with the given mean.
    pub fn exponential_mean(mean: f64) -> Result<Self> {
        Self::exponential(1.0 / positive("mean", mean)?)
    }

    /// Balanced-means two-phase hyper-exponential with mean `m1`: the
    /// branch rates are `2p/m1` and `2(1-p)/m1`, so each branch contributes
    /// `m1/2` to the mean.
    ///
    /// `p = 1` degenerates to a single branch and is returned as
    /// `Exponential(1/m1)` so that the mean stays `m1`.
    pub fn h2_balanced(m1: f64, p: f64) -> Result<Self> {
        positive("m1", m1)?;
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!("mixing probability must lie in (0, 1], got {p}")));
        }
        if p == 1.0 {
            return Self::exponential(1.0 / m1);
        }
        Self::hyper_exp2(p, 2.0 * p / m1, 2.0 * (1.0 - p) / m1)
    }

    /// Balanced-means H2 with mean `m1` and squared coefficient of
    /// variation `scv >= 1`, using `p = (1 + sqrt((c²-1)/(c²+1)))/2`.
    pub fn h2_from_scv(m1: f64, scv: f64) -> Result<Self> {
        if !scv.is_finite() || scv < 1.0 {
            return Err(Error::InvalidParameter(format!("squared coefficient of variation must be >= 1, got {scv}")));
        }
        let p = 0.5 * (1.0 + ((scv - 1.0) / (scv + 1.0)).sqrt());
        Self::h2_balanced(m1, p)
    }

    /// Erlang law with `shape` phases and the given mean.
    pub fn erlang_mean(shape: u32, mean: f64) -> Result<Self> {
        Self::erlang(shape, shape as f64 / positive("mean", mean)?)
    }

    /// Checks the parameter invariants of an already-constructed value.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Exponential { rate } => Self::exponential(rate).map(drop),
            Erlang { shape, rate } => Self::erlang(shape, rate).map(drop),
            HyperExp2 { p, rate1, rate2 } => Self::hyper_exp2(p, rate1, rate2).map(drop),
            Deterministic { value } => Self::deterministic(value).map(drop),
        }
    }

    /// The same family rescaled so that its mean is `mean`.
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        let factor = positive("mean", mean)? / self.mean();
        match *self {
            Exponential { rate } => Self::exponential(rate / factor),
            Erlang { shape, rate } => Self::erlang(shape, rate / factor),
            HyperExp2 { p, rate1, rate2 } => Self::hyper_exp2(p, rate1 / factor, rate2 / factor),
            Deterministic { value } => Self::deterministic(value * factor),
        }
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    /// Exact raw moment `E[X^order]` for `order` in 1..=3.
    pub fn moment(&self, order: u32) -> Result<f64> {
        if !(1..=3).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        Ok(self.raw_moment(order))
    }

    fn raw_moment(&self, order: u32) -> f64 {
        let i = order as i32;
        let fact: f64 = (1..=order).map(f64::from).product();
        match *self {
            Exponential { rate } => fact / rate.powi(i),
            Erlang { shape, rate } => {
                let rising: f64 = (0..order).map(|j| f64::from(shape + j)).product();
                rising / rate.powi(i)
            }
            HyperExp2 { p, rate1, rate2 } => fact * (p / rate1.powi(i) + (1.0 - p) / rate2.powi(i)),
            Deterministic { value } => value.powi(i),
        }
    }

    /// Squared coefficient of variation `Var[X] / E[X]^2`.
    pub fn scv(&self) -> f64 {
        let m1 = self.raw_moment(1);
        self.raw_moment(2) / (m1 * m1) - 1.0
    }

    /// The LST `E[exp(-sX)]`, defined here for `s >= 0`.
    pub fn lst(&self, s: f64) -> Result<f64> {
        check_arg(s)?;
        Ok(match *self {
            Exponential { rate } => rate / (rate + s),
            Erlang { shape, rate } => (rate / (rate + s)).powi(shape as i32),
            HyperExp2 { p, rate1, rate2 } => p * rate1 / (rate1 + s) + (1.0 - p) * rate2 / (rate2 + s),
            Deterministic { value } => (-s * value).exp(),
        })
    }

    /// `1 - lst(s)`, evaluated without cancellation for small `s`.
    pub fn lst_complement(&self, s: f64) -> Result<f64> {
        check_arg(s)?;
        Ok(match *self {
            Exponential { rate } => s / (rate + s),
            Erlang { shape, rate } => -(-(shape as f64) * (s / rate).ln_1p()).exp_m1(),
            HyperExp2 { p, rate1, rate2 } => p * s / (rate1 + s) + (1.0 - p) * s / (rate2 + s),
            Deterministic { value } => -(-s * value).exp_m1(),
        })
    }

    /// Closed-form derivative of the LST of order 1 or 2 at `s >= 0`.
    pub fn lst_deriv(&self, s: f64, order: u32) -> Result<f64> {
        check_arg(s)?;
        if !(1..=2).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        let second = order == 2;
        Ok(match *self {
            Exponential { rate } => {
                if second {
                    2.0 * rate / (rate + s).powi(3)
                } else {
                    -rate / (rate + s).powi(2)
                }
            }
            Erlang { shape, rate } => {
                let k = shape as f64;
                let base = (rate / (rate + s)).powi(shape as i32);
                if second {
                    k * (k + 1.0) * base / (rate + s).powi(2)
                } else {
                    -k * base / (rate + s)
                }
            }
            HyperExp2 { p, rate1, rate2 } => {
                if second {
                    2.0 * (p * rate1 / (rate1 + s).powi(3) + (1.0 - p) * rate2 / (rate2 + s).powi(3))
                } else {
                    -(p * rate1 / (rate1 + s).powi(2) + (1.0 - p) * rate2 / (rate2 + s).powi(2))
                }
            }
            Deterministic { value } => {
                let e = (-s * value).exp();
                if second {
                    value * value * e
                } else {
                    -value * e
                }
            }
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            Exponential { rate } => -(-rate * x).exp_m1(),
            Erlang { shape, rate } => {
                let rx = rate * x;
                let mut term = 1.0;
                let mut sum = 1.0;
                for n in 1..shape {
                    term *= rx / n as f64;
                    sum += term;
                }
                1.0 - (-rx).exp() * sum
            }
            HyperExp2 { p, rate1, rate2 } => 1.0 - p * (-rate1 * x).exp() - (1.0 - p) * (-rate2 * x).exp(),
            Deterministic { value } => {
                if x >= value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// One i.i.d. draw. Erlang draws are sums of `shape` exponentials and
    /// H2 draws pick a branch first.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Exponential { rate } => rng.sample::<f64, _>(Exp1) / rate,
            Erlang { shape, rate } => (0..shape).map(|_| rng.sample::<f64, _>(Exp1)).sum::<f64>() / rate,
            HyperExp2 { p, rate1, rate2 } => {
                let rate = if rng.random::<f64>() < p { rate1 } else { rate2 };
                rng.sample::<f64, _>(Exp1) / rate
            }
            Deterministic { value } => value,
        }
    }
}

fn check_arg(s: f64) -> Result<()> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what: "an LST", arg: s })
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Exponential { rate } => write!(f, "exp(rate={rate})"),
            Erlang { shape, rate } => write!(f, "erlang(k={shape},rate={rate})"),
            HyperExp2 { p, rate1, rate2 } => write!(f, "h2(p={p},rate1={rate1},rate2={rate2})"),
            Deterministic { value } => write!(f, "det(value={value})"),
        }
    }
}

/// Parses `exp(rate=..)`, `erlang(k=..,rate=..)`, `h2(m1=..,p=..)`,
/// `h2(p=..,rate1=..,rate2=..)` and `det(value=..)`.
impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParameter(format!("{msg} in distribution literal `{text}`"));
        let text_t = text.trim();
        let open = text_t.find('(').ok_or_else(|| bad("missing `(`".into()))?;
        if !text_t.ends_with(')') {
            return Err(bad("missing `)`".into()));
        }
        let family = text_t[..open].trim().to_ascii_lowercase();
        let body = &text_t[open + 1..text_t.len() - 1];

        let mut args: Vec<(String, f64)> = Vec::new();
        for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| bad(format!("argument `{part}` is not key=value")))?;
            let key = k.trim().to_ascii_lowercase();
            let value: f64 = v.trim().parse().map_err(|_| bad(format!("`{}` is not a number", v.trim())))?;
            if args.iter().any(|(seen, _)| *seen == key) {
                return Err(bad(format!("duplicate argument `{key}`")));
            }
            args.push((key, value));
        }
        let take = |allowed: &[&str]| -> Result<Vec<f64>> {
            if args.len() != allowed.len() {
                return Err(bad(format!("expected arguments {allowed:?}")));
            }
            allowed
                .iter()
                .map(|name| args.iter().find(|(k, _)| k == name).map(|(_, v)| *v).ok_or_else(|| bad(format!("missing argument `{name}`"))))
                .collect()
        };

        match family.as_str() {
            "exp" => Self::exponential(take(&["rate"])?[0]),
            "erlang" => {
                let v = take(&["k", "rate"])?;
                if v[0].fract() != 0.0 || v[0] < 1.0 || v[0] > u32::MAX as f64 {
                    return Err(bad(format!("Erlang shape must be a positive integer, got {}", v[0])));
                }
                Self::erlang(v[0] as u32, v[1])
            }
            "h2" if args.iter().any(|(k, _)| k == "m1") => {
                let v = take(&["m1", "p"])?;
                Self::h2_balanced(v[0], v[1])
            }
            "h2" => {
                let v = take(&["p", "rate1", "rate2"])?;
                Self::hyper_exp2(v[0], v[1], v[2])
            }
            "det" => Self::deterministic(take(&["value"])?[0]),
            other => Err(bad(format!("unknown family `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn families() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::exponential(2.0).unwrap(),
            DistributionSpec::erlang(2, 4.0).unwrap(),
            DistributionSpec::erlang(5, 3.0).unwrap(),
            DistributionSpec::hyper_exp2(0.7, 2.8, 1.2).unwrap(),
            DistributionSpec::deterministic(0.5).unwrap(),
        ]
    }

    #[test]
    fn balanced_h2_rates() {
        let d = DistributionSpec::h2_balanced(0.5, 0.7).unwrap();
        match d {
            HyperExp2 { p, rate1, rate2 } => {
                assert_eq!(p, 0.7);
                assert!((rate1 - 2.8).abs() < 1e-15);
                assert!((rate2 - 1.2).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!((d.mean() - 0.5).abs() < 1e-15);
        assert_eq!(DistributionSpec::h2_balanced(0.5, 1.0).unwrap(), Exponential { rate: 2.0 });
    }

    #[test]
    fn balanced_h2_rejects_bad_input() {
        assert!(DistributionSpec::h2_balanced(0.0, 0.5).is_err());
        assert!(DistributionSpec::h2_balanced(-1.0, 0.5).is_err());
        assert!(DistributionSpec::h2_balanced(1.0, 0.0).is_err());
        assert!(DistributionSpec::h2_balanced(1.0, 1.5).is_err());
    }

    #[test]
    fn moments_of_simple_laws() {
        let e = DistributionSpec::exponential(2.0).unwrap();
        assert_eq!(e.moment(1).unwrap(), 0.5);
        assert_eq!(e.moment(2).unwrap(), 0.5);
        assert_eq!(e.moment(3).unwrap(), 0.75);
        assert_eq!(DistributionSpec::erlang(2, 4.0).unwrap().moment(1).unwrap(), 0.5);
        assert_eq!(DistributionSpec::erlang(2, 4.0).unwrap().moment(2).unwrap(), 6.0 / 16.0);
        assert_eq!(e.moment(0), Err(Error::UnsupportedOrder(0)));
        assert_eq!(e.moment(4), Err(Error::UnsupportedOrder(4)));
    }

    #[test]
    fn lst_values() {
        let e = DistributionSpec::exponential(2.0).unwrap();
        assert!((e.lst(1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((DistributionSpec::erlang(2, 4.0).unwrap().lst(2.0).unwrap() - 4.0 / 9.0).abs() < 1e-15);
        for d in families() {
            assert_eq!(d.lst(0.0).unwrap(), 1.0);
            assert_eq!(d.lst_complement(0.0).unwrap(), 0.0);
            assert!(d.lst(1.0).unwrap() > d.lst(2.0).unwrap());
        }
        assert!(matches!(e.lst(-0.1), Err(Error::Domain { .. })));
        assert!(e.lst_deriv(-0.1, 1).is_err());
    }

    #[test]
    fn lst_derivs_at_zero_are_moments() {
        let e = DistributionSpec::exponential(2.0).unwrap();
        assert_eq!(e.lst_deriv(0.0, 1).unwrap(), -0.5);
        assert_eq!(e.lst_deriv(0.0, 2).unwrap(), 0.5);
        for d in families() {
            let m1 = d.moment(1).unwrap();
            let m2 = d.moment(2).unwrap();
            assert!((d.lst_deriv(0.0, 1).unwrap() + m1).abs() <= 1e-14 * m1);
            assert!((d.lst_deriv(0.0, 2).unwrap() - m2).abs() <= 1e-14 * m2);
            assert_eq!(d.lst_deriv(0.0, 3), Err(Error::UnsupportedOrder(3)));
        }
    }

    #[test]
    fn complement_matches_lst_away_from_zero() {
        for d in families() {
            for s in [0.1, 1.0, 10.0] {
                let diff = (1.0 - d.lst(s).unwrap()) - d.lst_complement(s).unwrap();
                assert!(diff.abs() < 1e-14, "{d} at {s}");
            }
            // relative accuracy where 1 - lst would cancel
            let tiny = 1e-12;
            let c = d.lst_complement(tiny).unwrap();
            assert!((c / tiny - d.mean()).abs() < 1e-9 * d.mean());
        }
    }

    #[test]
    fn deterministic_sampling_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = DistributionSpec::deterministic(0.5).unwrap();
        assert!((0..100).all(|_| d.sample(&mut rng) == 0.5));
    }

    #[test]
    fn with_mean_rescales() {
        for d in families() {
            let scaled = d.with_mean(1.7).unwrap();
            assert!((scaled.mean() - 1.7).abs() < 1e-13);
            assert!((scaled.scv() - d.scv()).abs() < 1e-12);
        }
    }

    #[test]
    fn literal_round_trip() {
        for d in families() {
            let text = d.to_string();
            assert_eq!(text.parse::<DistributionSpec>().unwrap(), d, "{text}");
        }
        assert_eq!("h2(m1=0.5, p=0.7)".parse::<DistributionSpec>().unwrap(), DistributionSpec::h2_balanced(0.5, 0.7).unwrap());
        assert_eq!(" erlang( k = 2 , rate = 4 ) ".parse::<DistributionSpec>().unwrap(), Erlang { shape: 2, rate: 4.0 });
    }

    #[test]
    fn literal_errors() {
        for bad in [
            "exp",
            "exp(rate=0)",
            "exp(rate=-1)",
            "exp(mean=2)",
            "erlang(k=1.5,rate=2)",
            "erlang(k=2)",
            "gamma(k=2,rate=1)",
            "det(value=abc)",
            "exp(rate=1,rate=2)",
            "h2(m1=1,p=2)",
        ] {
            assert!(bad.parse::<DistributionSpec>().is_err(), "{bad}");
        }
    }
}
