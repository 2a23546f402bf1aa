//! Property checks over every module, run by the `selfcheck` subcommand.

use aoi_core::aoi::{aaoi_all, event_probs_in, lemma_terms_in, AnalyticReport};
use aoi_core::des::{run_experiment, run_replication, AoiTracker, Horizon, SimConfig};
use aoi_core::numdiff::{central, central_with_step, forward};
use aoi_core::{DistributionSpec, SteadyState, SystemParams};

use crate::scenario::{Preset, Scenario};

pub struct Check {
    pub name: &'static str,
    pub outcome: Result<(), String>,
}

type CheckResult = Result<(), String>;
type CheckFn = fn() -> CheckResult;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> CheckResult {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn sample_laws() -> Vec<DistributionSpec> {
    vec![
        DistributionSpec::exponential(2.0).unwrap(),
        DistributionSpec::erlang(2, 4.0).unwrap(),
        DistributionSpec::erlang(5, 3.0).unwrap(),
        DistributionSpec::hyper_exp2(0.7, 2.8, 1.2).unwrap(),
        DistributionSpec::deterministic(0.5).unwrap(),
    ]
}

/// Stable parameter points of every figure preset.
pub fn preset_params() -> Vec<SystemParams> {
    [Preset::Fig3, Preset::Fig4, Preset::Fig5, Preset::Fig6a, Preset::Fig6b]
        .into_iter()
        .flat_map(|p| Scenario::preset(p).points())
        .filter_map(|p| p.params.ok())
        .filter(|p| SteadyState::new(p).is_ok())
        .collect()
}

fn lst_derivatives() -> CheckResult {
    for d in sample_laws() {
        for s in [0.0, 0.1, 1.0, 10.0] {
            for order in [1, 2] {
                let exact = d.lst_deriv(s, order).map_err(|e| e.to_string())?;
                let f = |x: f64| d.lst(x).unwrap();
                let fd = match (s == 0.0, order) {
                    (true, _) => forward(f, s, order),
                    (false, 1) => central(f, s, order),
                    (false, _) => central_with_step(f, s, order, 1e-2 * s.max(1.0)),
                };
                ensure(rel(exact, fd) < 1e-8, || format!("{d} at s={s}, order {order}: {exact} vs {fd}"))?;
            }
        }
    }
    Ok(())
}

fn moments_from_lst() -> CheckResult {
    for d in sample_laws() {
        for order in [1, 2] {
            let m = d.moment(order).map_err(|e| e.to_string())?;
            let from_lst = d.lst_deriv(0.0, order).map_err(|e| e.to_string())? * if order == 1 { -1.0 } else { 1.0 };
            ensure(rel(m, from_lst) < 1e-12, || format!("{d} moment {order}: {m} vs {from_lst}"))?;
        }
    }
    Ok(())
}

fn sojourn_lst_derivatives() -> CheckResult {
    for p in preset_params() {
        let st = SteadyState::new(&p).map_err(|e| e.to_string())?;
        for a in [0.05, 0.1, 0.3, 1.0, 3.0] {
            for order in [1, 2] {
                let exact = st.sojourn_lst_deriv(a, order).map_err(|e| e.to_string())?;
                let fd = central(|x| st.sojourn_lst(x).unwrap(), a, order);
                ensure(rel(exact, fd) < 1e-6, || format!("a={a}, order {order}: {exact} vs {fd}"))?;
            }
        }
    }
    Ok(())
}

fn pgf_normalization() -> CheckResult {
    for p in preset_params() {
        let st = SteadyState::new(&p).map_err(|e| e.to_string())?;
        let q = st.pgf_system(1.0).map_err(|e| e.to_string())?;
        let pq = st.pgf_queue(1.0).map_err(|e| e.to_string())?;
        ensure((q - 1.0).abs() < 1e-9 && (pq - 1.0).abs() < 1e-9, || format!("Q(1)={q}, P(1)={pq}"))?;
    }
    Ok(())
}

fn sojourn_mean_from_lst() -> CheckResult {
    for p in preset_params() {
        let st = SteadyState::new(&p).map_err(|e| e.to_string())?;
        let slope = -st.sojourn_lst_deriv(1e-9, 1).map_err(|e| e.to_string())?;
        let target = st.mean_waiting() + st.moments().eh;
        ensure((slope - target).abs() < 1e-8, || format!("-W*'(0+)={slope}, E[W]+E[H]={target}"))?;
    }
    Ok(())
}

fn littles_law() -> CheckResult {
    for p in preset_params() {
        let st = SteadyState::new(&p).map_err(|e| e.to_string())?;
        // Q'(1) by a one-sided difference from below
        let slope = -forward(|t| st.pgf_system(1.0 - t).unwrap(), 0.0, 1);
        let little = st.total_rate() * st.mean_sojourn();
        ensure(rel(slope, little) < 1e-6, || format!("Q'(1)={slope}, lambda E[T]={little}"))?;
    }
    Ok(())
}

fn lemma_consistency() -> CheckResult {
    for p in preset_params() {
        let st = SteadyState::new(&p).map_err(|e| e.to_string())?;
        let report = AnalyticReport::compute(&p).map_err(|e| e.to_string())?;
        for k in 0..p.num_sources() {
            let probs = event_probs_in(&st, k).map_err(|e| e.to_string())?;
            let t = lemma_terms_in(&st, k).map_err(|e| e.to_string())?;
            ensure((probs.p_b + probs.p_l - 1.0).abs() < 1e-12, || "p_b + p_l != 1".into())?;
            ensure((t.l1 - (t.a24 - t.a25)).abs() <= 1e-10 * t.l1.abs().max(1.0), || format!("l1={} a24-a25={}", t.l1, t.a24 - t.a25))?;
            let s = &report.sources[k];
            ensure(rel(s.delta_assembled, s.aaoi.delta_substitution) < 1e-10, || {
                format!("assembled {} vs collapsed {}", s.delta_assembled, s.aaoi.delta_substitution)
            })?;
        }
    }
    Ok(())
}

fn aaoi_lower_bound() -> CheckResult {
    for p in preset_params() {
        let eh = SteadyState::new(&p).map_err(|e| e.to_string())?.moments().eh;
        let all = aaoi_all(&p).map_err(|e| e.to_string())?;
        for (s, l) in all.sources.iter().zip(p.lambdas()) {
            ensure(s.delta_substitution >= 1.0 / l + eh, || format!("delta {} below 1/lambda + E[H]", s.delta_substitution))?;
        }
    }
    Ok(())
}

fn mm1() -> SystemParams {
    let exp = DistributionSpec::exponential(1.0).unwrap();
    SystemParams::homogeneous(&[0.5], exp, exp, 0.0).unwrap()
}

fn mm1_reduction() -> CheckResult {
    let d = aaoi_all(&mm1()).map_err(|e| e.to_string())?.sources[0].delta_substitution;
    ensure(rel(d, 3.5) < 1e-9, || format!("M/M/1 AAoI {d}, expected 3.5"))
}

fn tracker_geometry() -> CheckResult {
    let mut t = AoiTracker::new();
    t.record_delivery(2.0, 1.0).map_err(|e| e.to_string())?;
    t.record_delivery(4.0, 3.0).map_err(|e| e.to_string())?;
    ensure(t.area() == 6.0, || format!("area {}", t.area()))?;
    ensure(t.record_delivery(5.0, 2.0).is_err(), || "stale delivery accepted".into())
}

fn simulation_mm1() -> CheckResult {
    let cfg = SimConfig::new(mm1()).horizon(Horizon::Deliveries(20_000)).replications(20).seed(5);
    let r = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let e = &r.sources[0].aaoi;
    ensure(e.within_se(3.5, 4.0), || format!("simulated {} ± {:?}", e.mean, e.std_err))?;
    ensure(r.idle_fraction.mean <= r.availability_fraction.mean, || "idle fraction above availability".into())
}

fn simulation_determinism() -> CheckResult {
    let p = Scenario::preset(Preset::Fig3).points().swap_remove(5).params.map_err(|e| e.to_string())?;
    let cfg = SimConfig::new(p).horizon(Horizon::Deliveries(2_000)).replications(3).seed(9);
    let a = run_replication(&cfg, 1).map_err(|e| e.to_string())?;
    let b = run_replication(&cfg, 1).map_err(|e| e.to_string())?;
    ensure(a == b, || "identical configs gave different replications".into())
}

fn simulation_ergodic_identity() -> CheckResult {
    let p = Scenario::preset(Preset::Fig3).points().swap_remove(12).params.map_err(|e| e.to_string())?;
    let cfg = SimConfig::new(p).horizon(Horizon::Deliveries(10_000)).replications(10).seed(2);
    let r = run_experiment(&cfg).map_err(|e| e.to_string())?;
    for s in &r.sources {
        ensure(rel(s.aaoi.mean, s.aaoi_cycle.mean) < 0.02, || format!("area {} vs cycle {}", s.aaoi.mean, s.aaoi_cycle.mean))?;
    }
    Ok(())
}

pub fn run_all() -> Vec<Check> {
    let checks: [(&'static str, CheckFn); 13] = [
        ("dists: LST derivatives match finite differences", lst_derivatives),
        ("dists: moments match LST derivatives at 0", moments_from_lst),
        ("transforms: sojourn LST derivatives match finite differences", sojourn_lst_derivatives),
        ("transforms: P(1) = Q(1) = 1", pgf_normalization),
        ("transforms: -W*'(0+) = E[W] + E[H]", sojourn_mean_from_lst),
        ("transforms: Little's law", littles_law),
        ("aoi: p_b + p_l = 1, l1 = a24 - a25, assembled = collapsed", lemma_consistency),
        ("aoi: AAoI >= 1/lambda + E[H]", aaoi_lower_bound),
        ("aoi: M/M/1 reduction gives 3.5", mm1_reduction),
        ("des: exact sawtooth integration", tracker_geometry),
        ("des: M/M/1 AAoI within 4 SE of 3.5", simulation_mm1),
        ("des: replications are deterministic", simulation_determinism),
        ("des: area and cycle AAoI estimators agree", simulation_ergodic_identity),
    ];
    checks.into_iter().map(|(name, f)| Check { name, outcome: f() }).collect()
}
