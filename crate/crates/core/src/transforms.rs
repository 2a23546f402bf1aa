//! Steady-state transform algebra of the unreliable M/G/1 queue.
//!
//! A breakdown during service stretches that service into a *generalized
//! completion time* `H`: the service time plus every repair interval that
//! interrupts it. Failures arrive at rate `alpha` only while serving, so
//! `H* (a) = S*(h(a))` with the breakdown kernel `h(a) = a + alpha (1 - R*(a))`.
//! Once `H` is known, the queue is an ordinary M/G/1 queue with total
//! arrival rate `lambda = sum_k lambda_k`, and every quantity here follows
//! from that reduction.

use crate::dists::DistributionSpec;
use crate::error::{Error, Result};

/// Loads at or above `1 - STABILITY_MARGIN` are rejected as unstable.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Below this argument the sojourn LST is evaluated from its Taylor series.
const LST_SERIES_CUTOFF: f64 = 1e-8;

/// Below this argument the sojourn LST derivatives come from moments of `T`.
const DERIV_SERIES_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    pub lambda: f64,
    pub service: DistributionSpec,
    pub repair: DistributionSpec,
}

/// Arrival rates and laws for every source plus the server failure rate.
///
/// The simulator accepts different laws per source; the closed forms need
/// all service laws identical and all repair laws identical.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    sources: Vec<SourceParams>,
    alpha: f64,
}

impl SystemParams {
    pub fn new(sources: Vec<SourceParams>, alpha: f64) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::InvalidParameter("at least one source is required".into()));
        }
        for (k, s) in sources.iter().enumerate() {
            if !(s.lambda.is_finite() && s.lambda > 0.0) {
                return Err(Error::InvalidParameter(format!("arrival rate of source {} must be positive, got {}", k + 1, s.lambda)));
            }
            s.service.validate()?;
            s.repair.validate()?;
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!("failure rate must be nonnegative, got {alpha}")));
        }
        Ok(Self { sources, alpha })
    }

    /// Sources sharing one service law and one repair law.
    pub fn homogeneous(lambdas: &[f64], service: DistributionSpec, repair: DistributionSpec, alpha: f64) -> Result<Self> {
        Self::new(lambdas.iter().map(|&lambda| SourceParams { lambda, service, repair }).collect(), alpha)
    }

    pub fn sources(&self) -> &[SourceParams] {
        &self.sources
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.lambda).collect()
    }

    pub fn total_rate(&self) -> f64 {
        self.sources.iter().map(|s| s.lambda).sum()
    }

    /// The common (service, repair) pair, or an error when sources differ.
    pub fn shared_laws(&self) -> Result<(DistributionSpec, DistributionSpec)> {
        let first = &self.sources[0];
        if self.sources.iter().all(|s| s.service == first.service && s.repair == first.repair) {
            Ok((first.service, first.repair))
        } else {
            Err(Error::HeterogeneousLaws)
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.sources.clone(), alpha)
    }

    pub fn with_lambda(&self, k: usize, lambda: f64) -> Result<Self> {
        let mut sources = self.sources.clone();
        sources.get_mut(k).ok_or(Error::UnknownSource(k))?.lambda = lambda;
        Self::new(sources, self.alpha)
    }

    /// Replaces every source's repair law.
    pub fn with_repair(&self, repair: DistributionSpec) -> Result<Self> {
        let sources = self.sources.iter().map(|s| SourceParams { repair, ..*s }).collect();
        Self::new(sources, self.alpha)
    }
}

/// Moments of the generalized completion time `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionMoments {
    pub eh: f64,
    pub eh2: f64,
    pub eh3: f64,
    /// Total load `lambda * E[H]`.
    pub rho: f64,
    /// `rho < 1 - STABILITY_MARGIN`.
    pub stable: bool,
}

/// `h(a) = a + alpha (1 - R*(a))`.
pub fn breakdown_kernel(params: &SystemParams, a: f64) -> Result<f64> {
    let (_, repair) = params.shared_laws()?;
    kernel(params.alpha, &repair, a)
}

fn kernel(alpha: f64, repair: &DistributionSpec, a: f64) -> Result<f64> {
    if a.is_nan() || a < 0.0 {
        return Err(Error::Domain { what: "the breakdown kernel", arg: a });
    }
    Ok(a + alpha * repair.lst_complement(a)?)
}

/// Raw moments of `H` by the chain rule on `S*(h(a))` at zero. Available
/// for unstable parameters too; the `stable` flag reports the load check.
pub fn completion_moments(params: &SystemParams) -> Result<CompletionMoments> {
    let (service, repair) = params.shared_laws()?;
    Ok(moments_of(&service, &repair, params.alpha, params.total_rate()))
}

fn moments_of(service: &DistributionSpec, repair: &DistributionSpec, alpha: f64, lambda: f64) -> CompletionMoments {
    let [b1, b2, b3] = [1, 2, 3].map(|i| service.moment(i).expect("order in range"));
    let [g1, g2, g3] = [1, 2, 3].map(|i| repair.moment(i).expect("order in range"));
    let stretch = 1.0 + alpha * g1;
    let eh = b1 * stretch;
    let eh2 = b2 * stretch * stretch + b1 * alpha * g2;
    let eh3 = b3 * stretch.powi(3) + 3.0 * alpha * g2 * stretch * b2 + alpha * g3 * b1;
    let rho = lambda * eh;
    CompletionMoments { eh, eh2, eh3, rho, stable: rho < 1.0 - STABILITY_MARGIN }
}

/// Steady-state quantities of a stable parameter set.
///
/// Construction validates shared laws and stability once; every method is
/// then a pure function of its argument.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    lambdas: Vec<f64>,
    lambda: f64,
    alpha: f64,
    service: DistributionSpec,
    repair: DistributionSpec,
    moments: CompletionMoments,
}

impl SteadyState {
    pub fn new(params: &SystemParams) -> Result<Self> {
        let (service, repair) = params.shared_laws()?;
        let lambda = params.total_rate();
        let moments = moments_of(&service, &repair, params.alpha, lambda);
        if !moments.stable {
            return Err(Error::Unstable { rho: moments.rho });
        }
        Ok(Self { lambdas: params.lambdas(), lambda, alpha: params.alpha, service, repair, moments })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn total_rate(&self) -> f64 {
        self.lambda
    }

    pub fn moments(&self) -> CompletionMoments {
        self.moments
    }

    /// `rho_k = lambda_k E[H]`.
    pub fn source_load(&self, k: usize) -> Result<f64> {
        self.lambdas.get(k).map(|l| l * self.moments.eh).ok_or(Error::UnknownSource(k))
    }

    pub fn kernel(&self, a: f64) -> Result<f64> {
        kernel(self.alpha, &self.repair, a)
    }

    /// `H*(a)` and `1 - H*(a)`, the latter without cancellation.
    fn completion_lst_pair(&self, a: f64) -> Result<(f64, f64)> {
        let h = self.kernel(a)?;
        Ok((self.service.lst(h)?, self.service.lst_complement(h)?))
    }

    /// `H*(a) = S*(h(a))`.
    pub fn completion_lst(&self, a: f64) -> Result<f64> {
        Ok(self.completion_lst_pair(a)?.0)
    }

    /// First and second derivatives of `H*(a)`.
    fn completion_lst_derivs(&self, a: f64) -> Result<(f64, f64)> {
        let h = self.kernel(a)?;
        let dh = 1.0 - self.alpha * self.repair.lst_deriv(a, 1)?;
        let d2h = -self.alpha * self.repair.lst_deriv(a, 2)?;
        let s1 = self.service.lst_deriv(h, 1)?;
        let s2 = self.service.lst_deriv(h, 2)?;
        Ok((s1 * dh, s2 * dh * dh + s1 * d2h))
    }

    /// Probability the server is idle: `1 - lambda E[H]`.
    pub fn idle_prob(&self) -> f64 {
        1.0 - self.moments.rho
    }

    /// Probability the server is not under repair:
    /// `1 - lambda E[S] alpha E[R]`.
    pub fn availability(&self) -> f64 {
        1.0 - self.lambda * self.service.mean() * self.alpha * self.repair.mean()
    }

    /// Mean queue waiting time (Pollaczek-Khinchine on `H`).
    pub fn mean_waiting(&self) -> f64 {
        self.lambda * self.moments.eh2 / (2.0 * (1.0 - self.moments.rho))
    }

    /// `E[W^2]` by the Takacs recursion.
    pub fn waiting_second_moment(&self) -> f64 {
        let w = self.mean_waiting();
        2.0 * w * w + self.lambda * self.moments.eh3 / (3.0 * (1.0 - self.moments.rho))
    }

    /// Mean sojourn time `E[T] = E[W] + E[H]`.
    pub fn mean_sojourn(&self) -> f64 {
        self.mean_waiting() + self.moments.eh
    }

    /// `E[T^2]`, with `W` and `H` independent under FCFS.
    pub fn sojourn_second_moment(&self) -> f64 {
        self.waiting_second_moment() + 2.0 * self.mean_waiting() * self.moments.eh + self.moments.eh2
    }

    /// Time-average number in system, by Little's law.
    pub fn mean_system_size(&self) -> f64 {
        self.lambda * self.mean_sojourn()
    }

    /// Mean number waiting (excluding the packet at the server).
    pub fn mean_queue_size(&self) -> f64 {
        self.lambda * self.mean_waiting()
    }

    /// Sojourn-time LST
    /// `W*(a) = a H*(a) p0 / (a - lambda (1 - H*(a)))`.
    pub fn sojourn_lst(&self, a: f64) -> Result<f64> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::Domain { what: "the sojourn LST", arg: a });
        }
        if a <= LST_SERIES_CUTOFF {
            return Ok(1.0 - self.mean_sojourn() * a + 0.5 * self.sojourn_second_moment() * a * a);
        }
        let (lst, comp) = self.completion_lst_pair(a)?;
        Ok(a * lst * self.idle_prob() / (a - self.lambda * comp))
    }

    /// Derivative of order 1 or 2 of the sojourn LST.
    ///
    /// Uses the quotient rule on the closed form. Close to zero the quotient
    /// cancels badly, so tiny arguments (and `a = 0` itself) use the moment
    /// identities `W*'(0) = -E[T]`, `W*''(0) = E[T^2]`.
    pub fn sojourn_lst_deriv(&self, a: f64, order: u32) -> Result<f64> {
        if !(1..=2).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::Domain { what: "the sojourn LST", arg: a });
        }
        if a <= DERIV_SERIES_CUTOFF {
            let t2 = self.sojourn_second_moment();
            return Ok(if order == 1 { -self.mean_sojourn() + t2 * a } else { t2 });
        }
        let p0 = self.idle_prob();
        let (lst, comp) = self.completion_lst_pair(a)?;
        let (d1, d2) = self.completion_lst_derivs(a)?;
        // W = N / D with N = p0 a H, D = a - lambda (1 - H)
        let n = p0 * a * lst;
        let n1 = p0 * (lst + a * d1);
        let n2 = p0 * (2.0 * d1 + a * d2);
        let d = a - self.lambda * comp;
        let dd1 = 1.0 + self.lambda * d1;
        let dd2 = self.lambda * d2;
        let first_num = n1 * d - n * dd1;
        Ok(if order == 1 { first_num / (d * d) } else { (n2 * d - n * dd2) / (d * d) - 2.0 * dd1 * first_num / (d * d * d) })
    }

    fn check_z(z: f64) -> Result<()> {
        if (0.0..=1.0).contains(&z) {
            Ok(())
        } else {
            Err(Error::Domain { what: "a pgf on [0, 1]", arg: z })
        }
    }

    /// pgf of the number of packets waiting (excluding the one at the
    /// server): `p0 + p0 (1 - H*) / (H* - z)` with `H*` at `lambda (1 - z)`.
    pub fn pgf_queue(&self, z: f64) -> Result<f64> {
        Self::check_z(z)?;
        let u = 1.0 - z;
        if u <= LST_SERIES_CUTOFF {
            let m1 = self.mean_queue_size();
            let fact2 = self.lambda * self.lambda * self.waiting_second_moment();
            return Ok(1.0 - m1 * u + 0.5 * fact2 * u * u);
        }
        let p0 = self.idle_prob();
        let (_, comp) = self.completion_lst_pair(self.lambda * u)?;
        // H* - z = (1 - z) - (1 - H*)
        Ok(p0 + comp * p0 / (u - comp))
    }

    /// pgf of the number in system: `H* (1 - z) p0 / (H* - z)`.
    pub fn pgf_system(&self, z: f64) -> Result<f64> {
        Self::check_z(z)?;
        let u = 1.0 - z;
        if u <= LST_SERIES_CUTOFF {
            let m1 = self.mean_system_size();
            let fact2 = self.lambda * self.lambda * self.sojourn_second_moment();
            return Ok(1.0 - m1 * u + 0.5 * fact2 * u * u);
        }
        let (lst, comp) = self.completion_lst_pair(self.lambda * u)?;
        Ok(lst * u * self.idle_prob() / (u - comp))
    }
}

pub fn idle_prob(params: &SystemParams) -> Result<f64> {
    Ok(SteadyState::new(params)?.idle_prob())
}

pub fn availability(params: &SystemParams) -> Result<f64> {
    Ok(SteadyState::new(params)?.availability())
}

pub fn sojourn_lst(params: &SystemParams, a: f64) -> Result<f64> {
    SteadyState::new(params)?.sojourn_lst(a)
}

pub fn sojourn_lst_deriv(params: &SystemParams, a: f64, order: u32) -> Result<f64> {
    SteadyState::new(params)?.sojourn_lst_deriv(a, order)
}

pub fn pgf_queue(params: &SystemParams, z: f64) -> Result<f64> {
    SteadyState::new(params)?.pgf_queue(z)
}

pub fn pgf_system(params: &SystemParams, z: f64) -> Result<f64> {
    SteadyState::new(params)?.pgf_system(z)
}

pub fn mean_waiting(params: &SystemParams) -> Result<f64> {
    Ok(SteadyState::new(params)?.mean_waiting())
}

pub fn mean_sojourn(params: &SystemParams) -> Result<f64> {
    Ok(SteadyState::new(params)?.mean_sojourn())
}

pub fn mean_system_size(params: &SystemParams) -> Result<f64> {
    Ok(SteadyState::new(params)?.mean_system_size())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_mean(m: f64) -> DistributionSpec {
        DistributionSpec::exponential_mean(m).unwrap()
    }

    fn single(lambda: f64, service: DistributionSpec, repair: DistributionSpec, alpha: f64) -> SystemParams {
        SystemParams::homogeneous(&[lambda], service, repair, alpha).unwrap()
    }

    #[test]
    fn kernel_values() {
        let p = single(0.5, exp_mean(0.5), exp_mean(0.3), 0.1);
        assert!((breakdown_kernel(&p, 1.0).unwrap() - (1.0 + 0.1 * (1.0 - 10.0 / 13.0))).abs() < 1e-15);
        assert!((breakdown_kernel(&p, 1.0).unwrap() - 1.023076923076923).abs() < 1e-14);
        assert_eq!(breakdown_kernel(&p, 0.0).unwrap(), 0.0);
        let p0 = p.with_alpha(0.0).unwrap();
        for a in [0.0, 0.3, 7.0] {
            assert_eq!(breakdown_kernel(&p0, a).unwrap(), a);
        }
        assert!(breakdown_kernel(&p, -1.0).is_err());
    }

    #[test]
    fn completion_moment_values() {
        let p = single(0.5, exp_mean(0.5), exp_mean(0.3), 0.1);
        let m = completion_moments(&p).unwrap();
        assert!((m.eh - 0.515).abs() < 1e-15);
        assert!((m.eh2 - 0.53945).abs() < 1e-14);
        assert!(m.stable);
        let m0 = completion_moments(&p.with_alpha(0.0).unwrap()).unwrap();
        assert_eq!((m0.eh, m0.eh2), (0.5, 0.5));
        // unstable parameters still produce moments
        let hot = single(3.0, exp_mean(0.5), exp_mean(0.3), 0.1);
        let mh = completion_moments(&hot).unwrap();
        assert!(!mh.stable && mh.rho > 1.0);
    }

    #[test]
    fn idle_and_availability() {
        let p = single(0.5, exp_mean(0.5), exp_mean(0.3), 0.1);
        assert!((idle_prob(&p).unwrap() - 0.7425).abs() < 1e-15);
        assert!((availability(&p).unwrap() - 0.9925).abs() < 1e-15);
        let q = single(1.0, exp_mean(0.5), exp_mean(0.3), 0.0);
        assert_eq!(idle_prob(&q).unwrap(), 0.5);
        assert_eq!(availability(&q).unwrap(), 1.0);
        let tiny = single(1e-12, exp_mean(0.5), exp_mean(0.3), 0.1);
        assert!((idle_prob(&tiny).unwrap() - 1.0).abs() < 1e-11);
        let busy = single(0.96, exp_mean(0.5), exp_mean(0.3), 0.1);
        assert!((availability(&busy).unwrap() - 0.9856).abs() < 1e-15);
    }

    #[test]
    fn instability_is_reported() {
        let p = single(2.0, exp_mean(0.5), exp_mean(0.3), 0.1);
        assert!(matches!(SteadyState::new(&p), Err(Error::Unstable { rho }) if rho > 1.0));
        let edge = single(2.0, exp_mean(0.5), exp_mean(0.3), 0.0);
        assert!(matches!(idle_prob(&edge), Err(Error::Unstable { .. })));
    }

    #[test]
    fn heterogeneous_laws_rejected() {
        let p = SystemParams::new(
            vec![
                SourceParams { lambda: 0.1, service: exp_mean(0.5), repair: exp_mean(0.3) },
                SourceParams { lambda: 0.1, service: exp_mean(0.4), repair: exp_mean(0.3) },
            ],
            0.1,
        )
        .unwrap();
        assert_eq!(SteadyState::new(&p), Err(Error::HeterogeneousLaws));
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::homogeneous(&[], exp_mean(1.0), exp_mean(1.0), 0.1).is_err());
        assert!(SystemParams::homogeneous(&[0.0], exp_mean(1.0), exp_mean(1.0), 0.1).is_err());
        assert!(SystemParams::homogeneous(&[0.1], exp_mean(1.0), exp_mean(1.0), -0.1).is_err());
        let p = SystemParams::homogeneous(&[0.1, 0.2], exp_mean(1.0), exp_mean(1.0), 0.1).unwrap();
        assert_eq!(p.with_lambda(5, 0.1), Err(Error::UnknownSource(5)));
        assert!((p.total_rate() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn mm1_sojourn() {
        let p = single(0.5, exp_mean(1.0), exp_mean(0.3), 0.0);
        assert!((sojourn_lst(&p, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((sojourn_lst_deriv(&p, 1.0, 1).unwrap() + 2.0 / 9.0).abs() < 1e-15);
        assert!((sojourn_lst_deriv(&p, 1.0, 2).unwrap() - 1.0 / 3.375).abs() < 1e-15);
        assert!((mean_sojourn(&p).unwrap() - 2.0).abs() < 1e-15);
        // T ~ Exp(1/2): E[T^2] = 8
        assert!((SteadyState::new(&p).unwrap().sojourn_second_moment() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn pollaczek_khinchine_values() {
        let p = single(0.5, exp_mean(0.5), exp_mean(0.3), 0.0);
        assert!((mean_waiting(&p).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((mean_sojourn(&p).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((mean_system_size(&p).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let light = single(1e-9, exp_mean(0.5), exp_mean(0.3), 0.1);
        assert!((mean_sojourn(&light).unwrap() - 0.515).abs() < 1e-9);
        let mut last = 0.0;
        for lambda in [0.1, 0.5, 1.0, 1.5, 1.9, 1.94] {
            let w = mean_waiting(&single(lambda, exp_mean(0.5), exp_mean(0.3), 0.1)).unwrap();
            assert!(w > last);
            last = w;
        }
        assert!(last > 10.0);
    }

    #[test]
    fn sojourn_lst_limits() {
        let p = SystemParams::homogeneous(&[0.4, 0.12], DistributionSpec::erlang_mean(2, 0.48).unwrap(), exp_mean(0.3), 0.1).unwrap();
        let st = SteadyState::new(&p).unwrap();
        assert_eq!(st.sojourn_lst(0.0).unwrap(), 1.0);
        // the closed form just above the series cutoff agrees with the series
        let a = LST_SERIES_CUTOFF * 1.0001;
        let series = 1.0 - st.mean_sojourn() * a + 0.5 * st.sojourn_second_moment() * a * a;
        assert!((st.sojourn_lst(a).unwrap() - series).abs() < 1e-14);
        assert!(st.sojourn_lst(10.0).unwrap() < st.sojourn_lst(1.0).unwrap());
        assert!(st.sojourn_lst(-1.0).is_err());
        assert_eq!(st.sojourn_lst_deriv(0.0, 1).unwrap(), -st.mean_sojourn());
        assert_eq!(st.sojourn_lst_deriv(0.3, 3), Err(Error::UnsupportedOrder(3)));
    }

    #[test]
    fn pgf_limits() {
        let p = SystemParams::homogeneous(&[0.4, 0.12], DistributionSpec::h2_balanced(0.48, 0.7).unwrap(), exp_mean(0.3), 0.1).unwrap();
        let st = SteadyState::new(&p).unwrap();
        assert_eq!(st.pgf_system(1.0).unwrap(), 1.0);
        assert_eq!(st.pgf_queue(1.0).unwrap(), 1.0);
        assert!((st.pgf_system(0.0).unwrap() - st.idle_prob()).abs() < 1e-15);
        // P(0) = P(nobody waiting) = p0 + P(exactly one in system)
        assert!(st.pgf_queue(0.0).unwrap() > st.pgf_system(0.0).unwrap());
        assert!(st.pgf_system(1.5).is_err());
        assert!(st.pgf_queue(-0.1).is_err());
        let z = 1.0 - 1e-8;
        assert!((st.pgf_system(z).unwrap() - st.pgf_system(z - 1e-12).unwrap()).abs() < 1e-11);
    }

    #[test]
    fn pgf_matches_printed_ratio() {
        // Q(z) = S*(phi) (1 - z) p0 / (S*(phi) - z) written out naively
        let p = SystemParams::homogeneous(&[0.4, 0.12], DistributionSpec::erlang_mean(2, 0.48).unwrap(), exp_mean(0.3), 0.1).unwrap();
        let st = SteadyState::new(&p).unwrap();
        let (s, r) = p.shared_laws().unwrap();
        let lam = p.total_rate();
        for z in [0.0, 0.3, 0.6, 0.9] {
            let phi = lam - lam * z + 0.1 - 0.1 * r.lst(lam - lam * z).unwrap();
            let sp = s.lst(phi).unwrap();
            let q = sp * (1.0 - z) * st.idle_prob() / (sp - z);
            assert!((st.pgf_system(z).unwrap() - q).abs() < 1e-13);
            let busy_part = (1.0 - sp) * st.idle_prob() / (sp - z);
            assert!((st.pgf_queue(z).unwrap() - st.idle_prob() - busy_part).abs() < 1e-13);
        }
    }
}
