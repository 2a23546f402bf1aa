//! Closed-form per-source average AoI.
//!
//! For source `k` with inter-generation time `X ~ Exp(lambda_k)` the AAoI is
//! `lambda_k (E[X^2]/2 + E[X W] + E[X] E[H])`. The cross term `E[X W]`
//! splits on whether the previous packet of the same source is still in the
//! system when the next one is generated (event "b") or has already left
//! (event "l"); [`LemmaTerms`] holds the three conditional expectations of
//! that split, each a combination of `W*`, `W*'` and `W*''` at `lambda_k`.

use crate::error::{Error, Result};
use crate::transforms::{SteadyState, SystemParams};

/// Probabilities of the two arrival events for a source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventProbs {
    /// Previous same-source packet still in the system.
    pub p_b: f64,
    /// Previous same-source packet already delivered.
    pub p_l: f64,
}

/// The conditional expectations entering `E[X W]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaTerms {
    /// `E[R^b X | b]`: residual system time of the previous packet.
    pub l1: f64,
    /// `E[G^b X | b]`: work of other sources' packets generated during `X`.
    pub l2: f64,
    /// `E[(G^l + R^l) X | l]`.
    pub l3: f64,
    /// `E[T X | b]`, with `l1 = a24 - a25`.
    pub a24: f64,
    /// `E[X^2 | b]`.
    pub a25: f64,
}

impl LemmaTerms {
    /// `E[X W] = p_b (l1 + l2) + p_l l3`.
    pub fn cross_moment(&self, probs: &EventProbs) -> f64 {
        probs.p_b * (self.l1 + self.l2) + probs.p_l * self.l3
    }
}

/// Both readings of the general multi-source AAoI for one source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceAaoi {
    pub source: usize,
    /// The two-source closed form with `rho_2` replaced by the load of all
    /// other sources; every transform is evaluated at `lambda_k`.
    pub delta_substitution: f64,
    /// The general form as displayed, with `W*(lambda_j)`, `W*'(lambda_j)`
    /// inside the sum over other sources. Equal to the substitution form
    /// when every source has the same rate.
    pub delta_as_printed: f64,
    pub sojourn_lst: f64,
    pub sojourn_lst_deriv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AaoiResult {
    pub sources: Vec<SourceAaoi>,
    pub mean_waiting: f64,
    /// `E[H]`, the mean service time including repairs.
    pub mean_completion: f64,
}

/// Shared per-source transform values.
struct AtRate {
    lambda: f64,
    w: f64,
    w1: f64,
    w2: f64,
}

fn at_rate(st: &SteadyState, k: usize) -> Result<AtRate> {
    let lambda = *st.lambdas().get(k).ok_or(Error::UnknownSource(k))?;
    Ok(AtRate { lambda, w: st.sojourn_lst(lambda)?, w1: st.sojourn_lst_deriv(lambda, 1)?, w2: st.sojourn_lst_deriv(lambda, 2)? })
}

fn other_load(st: &SteadyState, k: usize) -> f64 {
    let lambda_k = st.lambdas()[k];
    (st.total_rate() - lambda_k).max(0.0) * st.moments().eh
}

/// `p_l = P(X > T) = W*(lambda_k)`; identical to
/// `S*(h(lambda_k)) lambda_k p0 / (lambda_k - lambda (1 - S*(h(lambda_k))))`.
pub fn event_probs(params: &SystemParams, k: usize) -> Result<EventProbs> {
    event_probs_in(&SteadyState::new(params)?, k)
}

pub fn event_probs_in(st: &SteadyState, k: usize) -> Result<EventProbs> {
    let lambda = *st.lambdas().get(k).ok_or(Error::UnknownSource(k))?;
    let p_l = st.sojourn_lst(lambda)?;
    Ok(EventProbs { p_b: 1.0 - p_l, p_l })
}

pub fn lemma_terms(params: &SystemParams, k: usize) -> Result<LemmaTerms> {
    lemma_terms_in(&SteadyState::new(params)?, k)
}

pub fn lemma_terms_in(st: &SteadyState, k: usize) -> Result<LemmaTerms> {
    let AtRate { lambda: l, w, w1, w2 } = at_rate(st, k)?;
    let probs = event_probs_in(st, k)?;
    let (p_b, p_l) = (probs.p_b, probs.p_l);
    let rho_other = other_load(st, k);
    let t_mean = st.mean_sojourn();
    let l_sq = l * l;

    // E[X^2 ; X < T] = 2/l² - W'' + 2W'/l - 2W/l²
    let x2_below = 2.0 / l_sq - w2 + 2.0 * w1 / l - 2.0 * w / l_sq;
    // E[T X ; X < T] = E[T]/l - W'' + W'/l
    let tx_below = t_mean / l - w2 + w1 / l;
    let l1 = (t_mean - w1 + (2.0 * w - 2.0) / l) / (l * p_b);
    let l2 = rho_other * x2_below / p_b;
    let l3 = rho_other * (w2 - w1 / l) / p_l;
    Ok(LemmaTerms { l1, l2, l3, a24: tx_below / p_b, a25: x2_below / p_b })
}

fn source_aaoi(st: &SteadyState, k: usize) -> Result<SourceAaoi> {
    let AtRate { lambda: l, w, w1, .. } = at_rate(st, k)?;
    let eh = st.moments().eh;
    let ew = st.mean_waiting();
    let rho_o = other_load(st, k);

    let delta_substitution = ew + 2.0 * eh + (2.0 * rho_o - 1.0) / l + 2.0 * (1.0 - rho_o) * w / l + (rho_o - 1.0) * w1;

    let mut sum = 0.0;
    for (j, &lj) in st.lambdas().iter().enumerate() {
        if j == k {
            continue;
        }
        let rho_j = lj * eh;
        sum += rho_j * (2.0 / lj + st.sojourn_lst_deriv(lj, 1)? - 2.0 * st.sojourn_lst(lj)? / lj);
    }
    let delta_as_printed = ew + 2.0 * eh + 2.0 * w / l - w1 - 1.0 / l + sum;

    Ok(SourceAaoi { source: k, delta_substitution, delta_as_printed, sojourn_lst: w, sojourn_lst_deriv: w1 })
}

/// Both AAoI readings for source `k`.
pub fn aaoi_source(params: &SystemParams, k: usize) -> Result<SourceAaoi> {
    source_aaoi(&SteadyState::new(params)?, k)
}

pub fn aaoi_all(params: &SystemParams) -> Result<AaoiResult> {
    let st = SteadyState::new(params)?;
    let sources = (0..params.num_sources()).map(|k| source_aaoi(&st, k)).collect::<Result<_>>()?;
    Ok(AaoiResult { sources, mean_waiting: st.mean_waiting(), mean_completion: st.moments().eh })
}

/// The same system with a perfectly reliable server (`alpha = 0`).
pub fn baseline_aaoi(params: &SystemParams) -> Result<AaoiResult> {
    aaoi_all(&params.with_alpha(0.0)?)
}

/// Per-source entries of an [`AnalyticReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct SourceReport {
    pub lambda: f64,
    pub rho: f64,
    pub probs: EventProbs,
    pub lemmas: LemmaTerms,
    /// `E[X W]` assembled from the lemma terms.
    pub cross_moment: f64,
    pub aaoi: SourceAaoi,
    /// AAoI assembled from `lambda (1/lambda² + E[X W] + E[H]/lambda)`.
    pub delta_assembled: f64,
    pub delta_baseline: f64,
}

/// Every closed-form output for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticReport {
    pub lambda: f64,
    pub alpha: f64,
    pub p0: f64,
    pub availability: f64,
    pub rho: f64,
    pub eh: f64,
    pub eh2: f64,
    pub mean_waiting: f64,
    pub mean_sojourn: f64,
    pub mean_system_size: f64,
    pub sources: Vec<SourceReport>,
}

impl AnalyticReport {
    pub fn compute(params: &SystemParams) -> Result<Self> {
        let st = SteadyState::new(params)?;
        let baseline = baseline_aaoi(params)?;
        let m = st.moments();
        let sources = (0..params.num_sources())
            .map(|k| {
                let lambda = st.lambdas()[k];
                let probs = event_probs_in(&st, k)?;
                let lemmas = lemma_terms_in(&st, k)?;
                let cross_moment = lemmas.cross_moment(&probs);
                Ok(SourceReport {
                    lambda,
                    rho: st.source_load(k)?,
                    probs,
                    lemmas,
                    cross_moment,
                    aaoi: source_aaoi(&st, k)?,
                    delta_assembled: lambda * (1.0 / (lambda * lambda) + cross_moment + m.eh / lambda),
                    delta_baseline: baseline.sources[k].delta_substitution,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            lambda: st.total_rate(),
            alpha: params.alpha(),
            p0: st.idle_prob(),
            availability: st.availability(),
            rho: m.rho,
            eh: m.eh,
            eh2: m.eh2,
            mean_waiting: st.mean_waiting(),
            mean_sojourn: st.mean_sojourn(),
            mean_system_size: st.mean_system_size(),
            sources,
        })
    }
}
