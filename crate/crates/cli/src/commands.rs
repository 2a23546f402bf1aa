//! The subcommands, as library functions returning their data and the text
//! they print.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use aoi_core::aoi::AnalyticReport;
use aoi_core::des::{run_experiment, run_replication, write_trace, SimulationReport};
use aoi_core::stats::Estimate;
use aoi_core::SteadyState;

use crate::scenario::{Point, Scenario};
use crate::table::{self, num, opt, SweepRow, SWEEP_HEADER};
use crate::CliError;

pub const VARIANTS: [&str; 2] = ["substitution", "as_printed"];

fn point_label(p: &Point) -> String {
    let mut s = format!("n_sources={} service={}", p.n_sources, p.service);
    if let (Some(var), Some(v)) = (p.sweep_var, p.sweep_value) {
        let _ = write!(s, " {}={}", var.name(), num(v));
    }
    s
}

fn point_columns(p: &Point) -> Vec<String> {
    vec![p.n_sources.to_string(), p.service.clone(), p.sweep_var.map(|v| v.name().to_string()).unwrap_or_default(), opt(p.sweep_value)]
}

const POINT_HEADER: [&str; 4] = ["n_sources", "service_dist", "sweep_var", "sweep_value"];

fn header(extra: &[&'static str]) -> Vec<&'static str> {
    POINT_HEADER.iter().chain(extra).copied().collect()
}

/// Output of a command: the text for stdout and the files to write.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    pub text: String,
    pub files: Vec<(String, String)>,
}

impl Output {
    pub fn write_files(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        self.files
            .iter()
            .map(|(name, contents)| {
                let path = dir.join(name);
                table::write_atomic(&path, contents.as_bytes()).map_err(|e| CliError::io(&path, e))?;
                Ok(path)
            })
            .collect()
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

fn params_of(p: &Point) -> Result<&aoi_core::SystemParams, CliError> {
    p.params.as_ref().map_err(|e| CliError::validation(format!("{}: {e}", point_label(p))))
}

pub fn analyze(scenario: &Scenario) -> Result<(Vec<(Point, AnalyticReport)>, Output), CliError> {
    let mut results = Vec::new();
    for p in scenario.points() {
        let report = AnalyticReport::compute(params_of(&p)?).map_err(|e| CliError::validation(format!("{}: {e}", point_label(&p))))?;
        results.push((p, report));
    }

    let mut text = String::new();
    let mut rows = Vec::new();
    for (p, r) in &results {
        let _ = writeln!(text, "[{}]", point_label(p));
        let _ = writeln!(text, "  alpha                = {}", num(r.alpha));
        let _ = writeln!(text, "  lambda (total)       = {}", num(r.lambda));
        let _ = writeln!(text, "  rho                  = {}", num(r.rho));
        let _ = writeln!(text, "  p0                   = {}", num(r.p0));
        let _ = writeln!(text, "  availability P_a     = {}", num(r.availability));
        let _ = writeln!(text, "  E[H]                 = {}", num(r.eh));
        let _ = writeln!(text, "  E[H^2]               = {}", num(r.eh2));
        let _ = writeln!(text, "  E[W]                 = {}", num(r.mean_waiting));
        let _ = writeln!(text, "  E[T]                 = {}", num(r.mean_sojourn));
        let _ = writeln!(text, "  mean system size     = {}", num(r.mean_system_size));
        for (k, s) in r.sources.iter().enumerate() {
            let _ = writeln!(
                text,
                "  source {}: lambda={} rho={} p_b={} p_l={} E[XW]={}",
                k + 1,
                num(s.lambda),
                num(s.rho),
                num(s.probs.p_b),
                num(s.probs.p_l),
                num(s.cross_moment)
            );
            let _ = writeln!(
                text,
                "    lemmas: l1={} l2={} l3={} a24={} a25={}",
                num(s.lemmas.l1),
                num(s.lemmas.l2),
                num(s.lemmas.l3),
                num(s.lemmas.a24),
                num(s.lemmas.a25)
            );
            let _ = writeln!(
                text,
                "    AAoI: substitution={} as_printed={} baseline={}",
                num(s.aaoi.delta_substitution),
                num(s.aaoi.delta_as_printed),
                num(s.delta_baseline)
            );
            let mut row = point_columns(p);
            row.extend([
                (k + 1).to_string(),
                num(s.lambda),
                num(s.rho),
                num(r.p0),
                num(r.availability),
                num(r.eh),
                num(r.eh2),
                num(r.mean_waiting),
                num(r.mean_sojourn),
                num(r.mean_system_size),
                num(s.probs.p_b),
                num(s.probs.p_l),
                num(s.lemmas.l1),
                num(s.lemmas.l2),
                num(s.lemmas.l3),
                num(s.lemmas.a24),
                num(s.lemmas.a25),
                num(s.cross_moment),
                num(s.aaoi.delta_substitution),
                num(s.aaoi.delta_as_printed),
                num(s.delta_assembled),
                num(s.delta_baseline),
            ]);
            rows.push(row);
        }
    }
    let h = header(&[
        "source",
        "lambda",
        "rho",
        "p0",
        "p_a",
        "eh",
        "eh2",
        "mean_waiting",
        "mean_sojourn",
        "mean_system_size",
        "p_b",
        "p_l",
        "l1",
        "l2",
        "l3",
        "a24",
        "a25",
        "cross_moment",
        "delta_substitution",
        "delta_as_printed",
        "delta_assembled",
        "delta_baseline",
    ]);
    let files = vec![("analyze.csv".to_string(), table::render(&h, &rows, &[]))];
    Ok((results, Output { text, files }))
}

fn ci(e: &Estimate) -> String {
    match e.ci95 {
        Some(hw) => format!("{} ± {}", num(e.mean), num(hw)),
        None => num(e.mean),
    }
}

/// Runs the simulation at every point. Unstable points are simulated too
/// and flagged. With `trace`, replication 0 of the first point is traced.
pub fn simulate(scenario: &Scenario, trace: Option<&Path>) -> Result<(Vec<(Point, SimulationReport)>, Output), CliError> {
    let points = scenario.points();
    for p in &points {
        params_of(p)?;
    }
    let results = points
        .into_par_iter()
        .map(|p| {
            let cfg = scenario.sim_config(params_of(&p)?.clone());
            let report = run_experiment(&cfg).map_err(|e| CliError::validation(format!("{}: {e}", point_label(&p))))?;
            Ok((p, report))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    if let (Some(path), Some((p, _))) = (trace, results.first()) {
        let mut cfg = scenario.sim_config(params_of(p)?.clone());
        cfg.trace = true;
        let rep = run_replication(&cfg, 0).map_err(|e| CliError::validation(e.to_string()))?;
        let mut buf = Vec::new();
        write_trace(&mut buf, rep.trace.as_deref().unwrap_or_default()).map_err(|e| CliError::io(path, e))?;
        table::write_atomic(path, &buf).map_err(|e| CliError::io(path, e))?;
    }

    let mut text = String::new();
    let mut rows = Vec::new();
    for (p, r) in &results {
        let stable = SteadyState::new(params_of(p)?).is_ok();
        let _ = writeln!(text, "[{}]{}", point_label(p), if stable { "" } else { " UNSTABLE" });
        let _ = writeln!(text, "  replications         = {}", r.replications);
        let _ = writeln!(text, "  idle fraction        = {}", ci(&r.idle_fraction));
        let _ = writeln!(text, "  availability         = {}", ci(&r.availability_fraction));
        let _ = writeln!(text, "  mean system size     = {}", ci(&r.mean_system_size));
        let _ = writeln!(text, "  mean completion      = {}", ci(&r.mean_completion));
        for (k, s) in r.sources.iter().enumerate() {
            let _ = writeln!(
                text,
                "  source {}: AAoI={} sojourn={} waiting={} p_l={} E[XW]={} deliveries={}",
                k + 1,
                ci(&s.aaoi),
                ci(&s.mean_sojourn),
                ci(&s.mean_waiting),
                ci(&s.p_l),
                ci(&s.cross_xw),
                s.deliveries
            );
            let mut row = point_columns(p);
            row.extend([
                (k + 1).to_string(),
                num(s.aaoi.mean),
                opt(s.aaoi.ci95),
                num(s.aaoi_cycle.mean),
                num(s.mean_sojourn.mean),
                num(s.mean_waiting.mean),
                num(s.p_l.mean),
                num(s.cross_xw.mean),
                s.deliveries.to_string(),
                num(r.idle_fraction.mean),
                num(r.availability_fraction.mean),
                num(r.mean_system_size.mean),
                stable.to_string(),
            ]);
            rows.push(row);
        }
    }
    let h = header(&[
        "source",
        "aaoi_mean",
        "aaoi_ci95",
        "aaoi_cycle_mean",
        "mean_sojourn",
        "mean_waiting",
        "p_l",
        "cross_xw",
        "deliveries",
        "idle_fraction",
        "availability_fraction",
        "mean_system_size",
        "stable_flag",
    ]);
    let files = vec![("simulate.csv".to_string(), table::render(&h, &rows, &[]))];
    Ok((results, Output { text, files }))
}

/// One point of an analytic-versus-simulation comparison for source 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub point: Point,
    pub analytic: AnalyticReport,
    pub sim: SimulationReport,
    /// Indexed like [`VARIANTS`].
    pub delta: [f64; 2],
    pub baseline: f64,
    pub z: [f64; 2],
    pub covered: [bool; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub label: String,
    pub mean_abs_z: [f64; 2],
    pub coverage: [usize; 2],
    pub points: usize,
    /// Index into [`VARIANTS`], or `None` on a tie.
    pub winner: Option<usize>,
}

impl Verdict {
    fn of(label: String, rows: &[&ComparisonRow]) -> Self {
        let n = rows.len();
        let mean_abs_z = [0, 1].map(|v| rows.iter().map(|r| r.z[v].abs()).sum::<f64>() / n as f64);
        let coverage = [0, 1].map(|v| rows.iter().filter(|r| r.covered[v]).count());
        let winner = if mean_abs_z[0] < mean_abs_z[1] {
            Some(0)
        } else if mean_abs_z[1] < mean_abs_z[0] {
            Some(1)
        } else {
            None
        };
        Self { label, mean_abs_z, coverage, points: n, winner }
    }

    pub fn winner_name(&self) -> &'static str {
        self.winner.map_or("tie", |v| VARIANTS[v])
    }

    pub fn winner_coverage(&self) -> Option<f64> {
        self.winner.map(|v| self.coverage[v] as f64 / self.points as f64)
    }

    pub fn line(&self) -> String {
        format!(
            "verdict {}: mean|z| substitution={} as_printed={}; CI coverage substitution={}/{} as_printed={}/{}; winner={}",
            self.label,
            num(self.mean_abs_z[0]),
            num(self.mean_abs_z[1]),
            self.coverage[0],
            self.points,
            self.coverage[1],
            self.points,
            self.winner_name()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Per source count, then the overall verdict over the points with at
    /// least three sources (where the two variants can differ most), or
    /// over all points if there are none.
    pub verdicts: Vec<Verdict>,
}

impl Comparison {
    pub fn overall(&self) -> &Verdict {
        self.verdicts.last().expect("at least one verdict")
    }
}

pub fn compare(scenario: &Scenario) -> Result<(Comparison, Output), CliError> {
    let points = scenario.points();
    let analytic = points
        .iter()
        .map(|p| AnalyticReport::compute(params_of(p)?).map_err(|e| CliError::validation(format!("{}: {e}", point_label(p)))))
        .collect::<Result<Vec<_>, _>>()?;
    let sims = points
        .par_iter()
        .map(|p| run_experiment(&scenario.sim_config(params_of(p)?.clone())).map_err(|e| CliError::validation(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;

    let rows: Vec<ComparisonRow> = points
        .into_iter()
        .zip(analytic)
        .zip(sims)
        .map(|((point, analytic), sim)| {
            let s = &analytic.sources[0];
            let delta = [s.aaoi.delta_substitution, s.aaoi.delta_as_printed];
            let est = &sim.sources[0].aaoi;
            let z = delta.map(|d| est.z_score(d).unwrap_or(f64::NAN));
            let covered = delta.map(|d| est.covers(d));
            let baseline = s.delta_baseline;
            ComparisonRow { point, analytic, sim, delta, baseline, z, covered }
        })
        .collect();

    let mut verdicts = Vec::new();
    let mut counts: Vec<usize> = rows.iter().map(|r| r.point.n_sources).collect();
    counts.sort_unstable();
    counts.dedup();
    for n in &counts {
        let group: Vec<_> = rows.iter().filter(|r| r.point.n_sources == *n).collect();
        verdicts.push(Verdict::of(format!("n_sources={n}"), &group));
    }
    let multi: Vec<_> = rows.iter().filter(|r| r.point.n_sources >= 3).collect();
    let overall = if multi.is_empty() {
        Verdict::of("overall".into(), &rows.iter().collect::<Vec<_>>())
    } else {
        Verdict::of("overall n_sources>=3".into(), &multi)
    };
    verdicts.push(overall);

    let mut text = String::new();
    let mut table_rows = Vec::new();
    for r in &rows {
        let est = &r.sim.sources[0].aaoi;
        let _ = writeln!(
            text,
            "[{}] sim={} substitution={} (z={}) as_printed={} (z={}) baseline={}",
            point_label(&r.point),
            ci(est),
            num(r.delta[0]),
            num(r.z[0]),
            num(r.delta[1]),
            num(r.z[1]),
            num(r.baseline)
        );
        let mut row = point_columns(&r.point);
        row.extend([
            num(r.delta[0]),
            num(r.delta[1]),
            num(r.baseline),
            num(est.mean),
            opt(est.ci95),
            opt(est.std_err),
            num(r.z[0]),
            num(r.z[1]),
            r.covered[0].to_string(),
            r.covered[1].to_string(),
        ]);
        table_rows.push(row);
    }
    let footer: Vec<String> = verdicts.iter().map(Verdict::line).collect();
    for line in &footer {
        let _ = writeln!(text, "{line}");
    }
    let h = header(&[
        "delta_substitution",
        "delta_as_printed",
        "delta_baseline",
        "sim_mean",
        "sim_ci95",
        "sim_se",
        "z_substitution",
        "z_as_printed",
        "covered_substitution",
        "covered_as_printed",
    ]);
    let files = vec![("compare.csv".to_string(), table::render(&h, &table_rows, &footer))];
    Ok((Comparison { rows, verdicts }, Output { text, files }))
}

fn file_stem(label: &str) -> String {
    let mut s: String = label.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

/// Sweep rows for every point, one file per service law. Unstable points
/// are flagged instead of aborting. With `with_sim` every stable point is
/// also simulated.
pub fn sweep(scenario: &Scenario, with_sim: bool) -> Result<(Vec<SweepRow>, Output), CliError> {
    let sweep = scenario
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::validation("the scenario has no sweep (set `preset` or `sweep` and `grid`)".into()))?;
    let points = scenario.points();
    let per_point = points
        .par_iter()
        .map(|p| -> Result<Vec<SweepRow>, CliError> {
            let params = params_of(p)?;
            let analytic = AnalyticReport::compute(params).ok();
            let sim = match (&analytic, with_sim) {
                (Some(_), true) => {
                    Some(run_experiment(&scenario.sim_config(params.clone())).map_err(|e| CliError::validation(e.to_string()))?)
                }
                _ => None,
            };
            Ok(VARIANTS
                .iter()
                .enumerate()
                .map(|(v, variant)| {
                    let a = analytic.as_ref();
                    let s1 = a.map(|a| &a.sources[0]);
                    let sim1 = sim.as_ref().map(|s| &s.sources[0]);
                    SweepRow {
                        sweep_var: sweep.var.name().to_string(),
                        sweep_value: p.sweep_value.filter(|x| x.is_finite()),
                        n_sources: p.n_sources,
                        service_dist: p.service.clone(),
                        variant: variant.to_string(),
                        delta_analytic: s1.map(|s| if v == 0 { s.aaoi.delta_substitution } else { s.aaoi.delta_as_printed }),
                        delta_baseline: s1.map(|s| s.delta_baseline),
                        delta_sim_mean: sim1.map(|s| s.aaoi.mean),
                        delta_sim_ci95: sim1.and_then(|s| s.aaoi.ci95),
                        p0: a.map(|a| a.p0),
                        p_a: a.map(|a| a.availability),
                        p_l_analytic: s1.map(|s| s.probs.p_l),
                        p_l_sim: sim1.map(|s| s.p_l.mean),
                        mean_sojourn_analytic: a.map(|a| a.mean_sojourn),
                        mean_sojourn_sim: sim1.map(|s| s.mean_sojourn.mean),
                        stable_flag: a.is_some(),
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<_>, _>>()?;

    let rows: Vec<SweepRow> = per_point.into_iter().flatten().collect();
    let mut files = Vec::new();
    let mut text = String::new();
    for law in &scenario.services {
        let label = law.label();
        let group: Vec<Vec<String>> = rows.iter().filter(|r| r.service_dist == label).map(SweepRow::record).collect();
        let name = format!("{}_{}.csv", scenario.figure_name(), file_stem(&label));
        let unstable = rows.iter().filter(|r| r.service_dist == label && !r.stable_flag).count() / VARIANTS.len();
        let _ = writeln!(text, "{name}: {} rows, {unstable} unstable points", group.len());
        files.push((name, table::render(&SWEEP_HEADER, &group, &[])));
    }
    Ok((rows, Output { text, files }))
}
