use aoi_core::numdiff::{central, central_with_step, forward};
use aoi_core::DistributionSpec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn laws() -> Vec<DistributionSpec> {
    vec![
        DistributionSpec::exponential(2.0).unwrap(),
        DistributionSpec::erlang(2, 4.0).unwrap(),
        DistributionSpec::erlang(3, 1.5).unwrap(),
        DistributionSpec::hyper_exp2(0.7, 2.8, 1.2).unwrap(),
        DistributionSpec::h2_balanced(0.5, 0.7).unwrap(),
        DistributionSpec::deterministic(0.5).unwrap(),
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn lst_derivatives_match_finite_differences() {
    for d in laws() {
        let f = |s: f64| d.lst(s).unwrap();
        for s in [0.0, 0.1, 1.0, 10.0] {
            for order in [1, 2] {
                let fd = match (s == 0.0, order) {
                    (true, _) => forward(f, s, order),
                    (false, 1) => central(f, s, order),
                    (false, _) => central_with_step(f, s, order, 1e-2 * s.max(1.0)),
                };
                let exact = d.lst_deriv(s, order).unwrap();
                assert!(rel(exact, fd) < 1e-8, "{d} s={s} order={order}: {exact} vs {fd}");
            }
        }
    }
}

#[test]
fn h2_first_derivative_at_one() {
    let d = DistributionSpec::hyper_exp2(0.7, 2.8, 1.2).unwrap();
    let fd = central(|s| d.lst(s).unwrap(), 1.0, 1);
    assert!(rel(d.lst_deriv(1.0, 1).unwrap(), fd) < 1e-9);
}

#[test]
fn moments_are_signed_lst_derivatives_at_zero() {
    for d in laws() {
        assert!(rel(d.moment(1).unwrap(), -d.lst_deriv(0.0, 1).unwrap()) < 1e-12);
        assert!(rel(d.moment(2).unwrap(), d.lst_deriv(0.0, 2).unwrap()) < 1e-12);
        assert!(d.moment(2).unwrap() >= d.moment(1).unwrap().powi(2) * (1.0 - 1e-12));
    }
}

/// Kolmogorov-Smirnov statistic of `n` samples against the law's CDF.
fn ks_statistic(d: &DistributionSpec, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
    xs.sort_by(f64::total_cmp);
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = d.cdf(x);
            (c - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - c).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn samplers_pass_ks_test() {
    let n = 100_000;
    // asymptotic critical value at level 0.001
    let critical = 1.949 / (n as f64).sqrt();
    for (i, d) in laws().into_iter().filter(|d| !matches!(d, DistributionSpec::Deterministic { .. })).enumerate() {
        let stat = ks_statistic(&d, n, 100 + i as u64);
        assert!(stat < critical, "{d}: D = {stat} (critical {critical})");
    }
}

#[test]
fn sample_means_obey_the_law_of_large_numbers() {
    let n = 1_000_000;
    for (i, d) in laws().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7 + i as u64);
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = d.moment(2).unwrap() - d.mean().powi(2);
        let se = (var / n as f64).sqrt();
        assert!((mean - d.mean()).abs() <= 5.0 * se.max(1e-15), "{d}: {mean} vs {}", d.mean());
    }
}

#[test]
fn literals_round_trip() {
    for d in laws() {
        assert_eq!(d.to_string().parse::<DistributionSpec>().unwrap(), d);
    }
    assert!("erlang(k=2)".parse::<DistributionSpec>().is_err());
    assert!("exp(rate=-1)".parse::<DistributionSpec>().is_err());
    assert!("weibull(k=2)".parse::<DistributionSpec>().is_err());
}

proptest! {
    #[test]
    fn balanced_h2_keeps_mean_and_inverts_p(m1 in 0.01f64..10.0, p in 0.5f64..0.999) {
        let d = DistributionSpec::h2_balanced(m1, p).unwrap();
        prop_assert!(rel(d.mean(), m1) < 1e-12);
        // the squared coefficient of variation determines p back
        let c2 = d.scv();
        let p_back = (1.0 + ((c2 - 1.0) / (c2 + 1.0)).sqrt()) / 2.0;
        prop_assert!((p_back - p).abs() < 1e-9);
        let from_scv = DistributionSpec::h2_from_scv(m1, c2).unwrap();
        prop_assert!(rel(from_scv.moment(2).unwrap(), d.moment(2).unwrap()) < 1e-9);
    }

    #[test]
    fn lst_is_a_decreasing_convex_function(rate in 0.1f64..10.0, k in 1u32..6, s in 0.0f64..20.0) {
        let d = DistributionSpec::erlang(k, rate).unwrap();
        let v = d.lst(s).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0);
        prop_assert!(d.lst_deriv(s, 1).unwrap() <= 0.0);
        prop_assert!(d.lst_deriv(s, 2).unwrap() >= 0.0);
        prop_assert!((d.lst_complement(s).unwrap() - (1.0 - v)).abs() < 1e-12);
    }

    #[test]
    fn with_mean_rescales(mean in 0.01f64..10.0, target in 0.01f64..10.0) {
        for d in [DistributionSpec::erlang_mean(2, mean).unwrap(), DistributionSpec::h2_balanced(mean, 0.7).unwrap(), DistributionSpec::deterministic(mean).unwrap()] {
            let scaled = d.with_mean(target).unwrap();
            prop_assert!(rel(scaled.mean(), target) < 1e-12);
            prop_assert!((scaled.scv() - d.scv()).abs() < 1e-9);
        }
    }
}
