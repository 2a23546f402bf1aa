//! Scenario files: `key = value` lines, `#` comments, figure presets.
//!
//! A scenario describes a family of parameter points: every combination of
//! source count, service law and sweep value. Presets fill every key with
//! the figure's caption values; keys given after the preset override them.

use std::fmt;
use std::str::FromStr;

use aoi_core::des::{Horizon, SimConfig, DEFAULT_HORIZON, DEFAULT_WARMUP_FRACTION};
use aoi_core::{DistributionSpec, SteadyState, SystemParams};

/// Caption values shared by every figure.
pub const CAPTION_SERVICE_MEAN: f64 = 0.5;
pub const CAPTION_REPAIR_MEAN: f64 = 0.3;
pub const CAPTION_ALPHA: f64 = 0.1;
pub const CAPTION_H2_P: f64 = 0.7;
pub const CAPTION_LAMBDA_OTHER: f64 = 0.12;

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ParseError {
    fn new(line: Option<usize>, key: &str, message: impl Into<String>) -> Self {
        Self { line, key: Some(key.to_string()), message: message.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}, key `{k}`: {}", self.message),
            (None, Some(k)) => write!(f, "key `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig3,
    Fig4,
    Fig5,
    Fig6a,
    Fig6b,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6a => "fig6a",
            Preset::Fig6b => "fig6b",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "fig3" => Preset::Fig3,
            "fig4" => Preset::Fig4,
            "fig5" => Preset::Fig5,
            "fig6a" => Preset::Fig6a,
            "fig6b" => Preset::Fig6b,
            _ => return Err(format!("unknown preset `{s}` (expected fig3, fig4, fig5, fig6a or fig6b)")),
        })
    }
}

/// Service law of a scenario. The named families are scaled so that the
/// completion time including repairs has the scenario's service mean.
#[derive(Debug, Clone, PartialEq)]
pub enum ServiceLaw {
    Exponential,
    Erlang2,
    H2,
    Literal(DistributionSpec),
}

impl ServiceLaw {
    pub fn label(&self) -> String {
        match self {
            ServiceLaw::Exponential => "exp".into(),
            ServiceLaw::Erlang2 => "erlang2".into(),
            ServiceLaw::H2 => "h2".into(),
            ServiceLaw::Literal(d) => d.to_string(),
        }
    }

    fn parse(s: &str) -> Result<Self, String> {
        Ok(match s {
            "exp" => ServiceLaw::Exponential,
            "erlang2" => ServiceLaw::Erlang2,
            "h2" => ServiceLaw::H2,
            _ => ServiceLaw::Literal(s.parse::<DistributionSpec>().map_err(|e| e.to_string())?),
        })
    }
}

/// Parameter a sweep moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    Lambda1,
    /// `lambda_1 = rho_1 / E[H]`.
    Rho1,
    Alpha,
    RepairMean,
    /// Grid values are `lambda_1`; the reported x value is the availability.
    Availability,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Lambda1 => "lambda1",
            SweepVar::Rho1 => "rho1",
            SweepVar::Alpha => "alpha",
            SweepVar::RepairMean => "repair_mean",
            SweepVar::Availability => "availability",
        }
    }
}

impl FromStr for SweepVar {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "lambda1" => SweepVar::Lambda1,
            "rho1" => SweepVar::Rho1,
            "alpha" => SweepVar::Alpha,
            "repair_mean" => SweepVar::RepairMean,
            "availability" => SweepVar::Availability,
            _ => return Err(format!("unknown sweep variable `{s}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub seed: u64,
    pub replications: usize,
    pub horizon: Horizon,
    pub warmup: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { seed: 1, replications: 30, horizon: DEFAULT_HORIZON, warmup: DEFAULT_WARMUP_FRACTION }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub preset: Option<Preset>,
    /// Explicit per-source rates; overrides `n_sources`, `lambda1` and
    /// `lambda_other`.
    pub sources: Option<Vec<f64>>,
    pub n_sources: Vec<usize>,
    pub lambda1: f64,
    pub lambda_other: f64,
    pub services: Vec<ServiceLaw>,
    /// Target mean of the completion time (service plus repairs).
    pub service_mean: f64,
    /// Use `service_mean` as the plain service mean instead.
    pub raw_service_mean: bool,
    pub h2_p: f64,
    pub repair: DistributionSpec,
    pub alpha: f64,
    pub sweep: Option<Sweep>,
    pub sim: SimSettings,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            preset: None,
            sources: None,
            n_sources: vec![1],
            lambda1: 0.5,
            lambda_other: CAPTION_LAMBDA_OTHER,
            services: vec![ServiceLaw::Exponential],
            service_mean: CAPTION_SERVICE_MEAN,
            raw_service_mean: false,
            h2_p: CAPTION_H2_P,
            repair: DistributionSpec::Exponential { rate: 1.0 / CAPTION_REPAIR_MEAN },
            alpha: 0.0,
            sweep: None,
            sim: SimSettings::default(),
        }
    }
}

fn grid(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| ((start + step * i as f64) * 1e9).round() / 1e9).collect()
}

impl Scenario {
    pub fn preset(preset: Preset) -> Self {
        let base = Self {
            preset: Some(preset),
            n_sources: vec![2, 3, 4],
            lambda1: 0.3,
            services: vec![ServiceLaw::Erlang2, ServiceLaw::H2],
            alpha: CAPTION_ALPHA,
            ..Self::default()
        };
        match preset {
            Preset::Fig3 => Self { sweep: Some(Sweep { var: SweepVar::Lambda1, grid: grid(0.1, 0.1, 10) }), ..base },
            Preset::Fig4 => Self { sweep: Some(Sweep { var: SweepVar::Rho1, grid: grid(0.05, 0.05, 10) }), ..base },
            Preset::Fig5 => Self {
                services: vec![ServiceLaw::Exponential, ServiceLaw::Erlang2, ServiceLaw::H2],
                sweep: Some(Sweep { var: SweepVar::Alpha, grid: grid(0.0, 0.05, 11) }),
                ..base
            },
            Preset::Fig6a => {
                Self { n_sources: vec![2, 4], sweep: Some(Sweep { var: SweepVar::RepairMean, grid: grid(0.1, 0.1, 9) }), ..base }
            }
            Preset::Fig6b => {
                Self { n_sources: vec![2, 4], sweep: Some(Sweep { var: SweepVar::Availability, grid: grid(0.06, 0.06, 10) }), ..base }
            }
        }
    }

    /// Parses scenario text. A `preset` key, wherever it appears, is
    /// expanded first; every other key then overrides it.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ParseError { line: Some(i + 1), key: None, message: format!("expected `key = value`, got `{line}`") });
            };
            entries.push((Some(i + 1), key.trim().to_string(), value.trim().to_string()));
        }
        Self::from_entries(entries)
    }

    /// Applies `key=value` overrides (as given on the command line).
    pub fn with_overrides(mut self, overrides: &[(String, String)]) -> Result<Self, ParseError> {
        for (key, value) in overrides {
            if key == "preset" {
                return Err(ParseError::new(None, key, "a preset cannot be given as an override"));
            }
            self.set(None, key, value)?;
        }
        self.check()?;
        Ok(self)
    }

    fn from_entries(entries: Vec<(Option<usize>, String, String)>) -> Result<Self, ParseError> {
        let mut presets = entries.iter().filter(|(_, k, _)| k == "preset");
        let mut scenario = match presets.next() {
            Some((line, key, value)) => Self::preset(value.parse().map_err(|e| ParseError::new(*line, key, e))?),
            None => Self::default(),
        };
        if let Some((line, key, _)) = presets.next() {
            return Err(ParseError::new(*line, key, "preset given twice"));
        }
        for (line, key, value) in &entries {
            if key != "preset" {
                scenario.set(*line, key, value)?;
            }
        }
        scenario.check()?;
        Ok(scenario)
    }

    fn set(&mut self, line: Option<usize>, key: &str, value: &str) -> Result<(), ParseError> {
        let err = |m: String| ParseError::new(line, key, m);
        let real = |v: &str| -> Result<f64, ParseError> {
            v.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| err(format!("`{v}` is not a real number")))
        };
        let positive = |v: &str| -> Result<f64, ParseError> {
            let x = real(v)?;
            if x > 0.0 {
                Ok(x)
            } else {
                Err(err(format!("must be positive, got {x}")))
            }
        };
        match key {
            "sources" => {
                let rates = list(value).into_iter().map(positive).collect::<Result<Vec<_>, _>>()?;
                if rates.is_empty() {
                    return Err(err("at least one source is required".into()));
                }
                self.sources = Some(rates);
            }
            "n_sources" => {
                let ns = list(value)
                    .into_iter()
                    .map(|s| s.parse::<usize>().ok().filter(|&n| n >= 1).ok_or_else(|| err(format!("`{s}` is not a source count"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if ns.is_empty() {
                    return Err(err("at least one source count is required".into()));
                }
                self.n_sources = ns;
                self.sources = None;
            }
            "lambda1" => {
                self.lambda1 = positive(value)?;
                self.sources = None;
            }
            "lambda_other" => self.lambda_other = positive(value)?,
            "service" => {
                let laws = list(value).into_iter().map(ServiceLaw::parse).collect::<Result<Vec<_>, _>>().map_err(err)?;
                if laws.is_empty() {
                    return Err(err("at least one service law is required".into()));
                }
                self.services = laws;
            }
            "service_mean" => self.service_mean = positive(value)?,
            "raw_service_mean" => {
                self.raw_service_mean = value.parse::<bool>().map_err(|_| err(format!("`{value}` is not true or false")))?
            }
            "h2_p" => {
                let p = real(value)?;
                if !(0.5..=1.0).contains(&p) {
                    return Err(err(format!("must lie in [0.5, 1], got {p}")));
                }
                self.h2_p = p;
            }
            "repair" => self.repair = value.parse::<DistributionSpec>().map_err(|e| err(e.to_string()))?,
            "repair_mean" => self.repair = self.repair.with_mean(positive(value)?).map_err(|e| err(e.to_string()))?,
            "alpha" => {
                let a = real(value)?;
                if a < 0.0 {
                    return Err(err(format!("must be nonnegative, got {a}")));
                }
                self.alpha = a;
            }
            "sweep" => {
                if value == "none" {
                    self.sweep = None;
                } else {
                    let var = value.parse::<SweepVar>().map_err(err)?;
                    let grid = self.sweep.take().map(|s| s.grid).unwrap_or_default();
                    self.sweep = Some(Sweep { var, grid });
                }
            }
            "grid" => {
                let grid = list(value).into_iter().map(real).collect::<Result<Vec<_>, _>>()?;
                match &mut self.sweep {
                    Some(s) => s.grid = grid,
                    None => return Err(err("`grid` needs a `sweep` variable first".into())),
                }
            }
            "seed" => self.sim.seed = value.parse().map_err(|_| err(format!("`{value}` is not a seed")))?,
            "replications" => {
                self.sim.replications =
                    value.parse().ok().filter(|&n| n >= 1).ok_or_else(|| err(format!("`{value}` is not a replication count")))?
            }
            "horizon" => {
                self.sim.horizon = Horizon::Deliveries(
                    value.parse().ok().filter(|&n| n >= 1).ok_or_else(|| err(format!("`{value}` is not a delivery count")))?,
                )
            }
            "horizon_time" => self.sim.horizon = Horizon::Time(positive(value)?),
            "warmup" => {
                let w = real(value)?;
                if !(0.0..1.0).contains(&w) {
                    return Err(err(format!("must lie in [0, 1), got {w}")));
                }
                self.sim.warmup = w;
            }
            _ => return Err(err("unknown key".into())),
        }
        Ok(())
    }

    fn check(&self) -> Result<(), ParseError> {
        if let Some(s) = &self.sweep {
            let key = "grid";
            if s.grid.is_empty() {
                return Err(ParseError::new(None, key, "sweep grid is empty"));
            }
            if s.grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ParseError::new(None, key, "sweep grid must be strictly increasing"));
            }
            let nonneg = matches!(s.var, SweepVar::Alpha);
            if s.grid.iter().any(|&x| if nonneg { x < 0.0 } else { x <= 0.0 }) {
                return Err(ParseError::new(None, key, format!("grid values out of range for {}", s.var.name())));
            }
        }
        Ok(())
    }

    /// Plain service mean of the named families. With the generalized
    /// reading it is fixed from the scenario's own `alpha` and repair mean,
    /// so sweeping either leaves the service law untouched.
    pub fn base_service_mean(&self) -> f64 {
        if self.raw_service_mean {
            self.service_mean
        } else {
            self.service_mean / (1.0 + self.alpha * self.repair.mean())
        }
    }

    pub fn service_spec(&self, law: &ServiceLaw) -> aoi_core::Result<DistributionSpec> {
        let m = self.base_service_mean();
        match law {
            ServiceLaw::Exponential => DistributionSpec::exponential_mean(m),
            ServiceLaw::Erlang2 => DistributionSpec::erlang_mean(2, m),
            ServiceLaw::H2 => DistributionSpec::h2_balanced(m, self.h2_p),
            ServiceLaw::Literal(d) => Ok(*d),
        }
    }

    /// Source counts the scenario ranges over.
    pub fn source_counts(&self) -> Vec<usize> {
        match &self.sources {
            Some(rates) => vec![rates.len()],
            None => self.n_sources.clone(),
        }
    }

    fn rates(&self, n: usize) -> Vec<f64> {
        match &self.sources {
            Some(rates) => rates.clone(),
            None => {
                let mut rates = vec![self.lambda_other; n];
                rates[0] = self.lambda1;
                rates
            }
        }
    }

    /// Every parameter point: source counts, then service laws, then grid
    /// order.
    pub fn points(&self) -> Vec<Point> {
        let mut out = Vec::new();
        for n in self.source_counts() {
            for law in &self.services {
                match &self.sweep {
                    None => out.push(self.point(n, law, None)),
                    Some(s) => out.extend(s.grid.iter().map(|&v| self.point(n, law, Some((s.var, v))))),
                }
            }
        }
        out
    }

    fn point(&self, n: usize, law: &ServiceLaw, sweep: Option<(SweepVar, f64)>) -> Point {
        let params = self.point_params(n, law, sweep);
        let x = match (sweep, &params) {
            (Some((SweepVar::Availability, _)), Ok(p)) => Some(SteadyState::new(p).map(|st| st.availability()).unwrap_or(f64::NAN)),
            (Some((_, v)), _) => Some(v),
            (None, _) => None,
        };
        Point {
            n_sources: n,
            service: law.label(),
            sweep_var: sweep.map(|(var, _)| var),
            grid_value: sweep.map(|(_, v)| v),
            sweep_value: x,
            params,
        }
    }

    fn point_params(&self, n: usize, law: &ServiceLaw, sweep: Option<(SweepVar, f64)>) -> aoi_core::Result<SystemParams> {
        let service = self.service_spec(law)?;
        let mut rates = self.rates(n);
        let mut alpha = self.alpha;
        let mut repair = self.repair;
        match sweep {
            None => {}
            Some((SweepVar::Lambda1 | SweepVar::Availability, v)) => rates[0] = v,
            Some((SweepVar::Rho1, v)) => {
                let probe = SystemParams::homogeneous(&rates, service, repair, alpha)?;
                rates[0] = v / aoi_core::transforms::completion_moments(&probe)?.eh;
            }
            Some((SweepVar::Alpha, v)) => alpha = v,
            Some((SweepVar::RepairMean, v)) => repair = repair.with_mean(v)?,
        }
        SystemParams::homogeneous(&rates, service, repair, alpha)
    }

    pub fn sim_config(&self, params: SystemParams) -> SimConfig {
        SimConfig::new(params).horizon(self.sim.horizon).replications(self.sim.replications).seed(self.sim.seed).warmup(self.sim.warmup)
    }

    /// Name used for output files.
    pub fn figure_name(&self) -> &'static str {
        self.preset.map_or("scenario", Preset::name)
    }
}

/// One parameter point of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub n_sources: usize,
    pub service: String,
    pub sweep_var: Option<SweepVar>,
    /// Grid value the point was built from.
    pub grid_value: Option<f64>,
    /// Reported x value (differs from the grid value for availability).
    pub sweep_value: Option<f64>,
    pub params: aoi_core::Result<SystemParams>,
}

/// Splits on commas that are not inside parentheses, dropping empty items.
fn list(s: &str) -> Vec<&str> {
    split_top_level(s).into_iter().filter(|s| !s.is_empty()).collect()
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(s[start..].trim());
    parts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig3_preset_defaults() {
        let s = Scenario::parse("preset = fig3\n").unwrap();
        assert_eq!(s.n_sources, vec![2, 3, 4]);
        assert_eq!(s.services, vec![ServiceLaw::Erlang2, ServiceLaw::H2]);
        assert_eq!(s.alpha, 0.1);
        assert!((s.repair.mean() - 0.3).abs() < 1e-15);
        assert!((s.base_service_mean() - 0.5 / 1.03).abs() < 1e-15);
        let sweep = s.sweep.as_ref().unwrap();
        assert_eq!(sweep.var, SweepVar::Lambda1);
        assert_eq!(s.points().len(), 3 * 2 * sweep.grid.len());
    }

    #[test]
    fn preset_values_are_overridable() {
        let s = Scenario::parse("alpha = 0\npreset = fig3\nn_sources = 2\n").unwrap();
        assert_eq!(s.alpha, 0.0);
        assert_eq!(s.n_sources, vec![2]);
        // completion mean 0.5 at the scenario's own alpha
        assert_eq!(s.base_service_mean(), 0.5);
    }

    #[test]
    fn errors_name_key_and_line() {
        let e = Scenario::parse("alpha = 0.1\nsources =\n").unwrap_err();
        assert_eq!((e.line, e.key.as_deref()), (Some(2), Some("sources")));
        let e = Scenario::parse("bogus = 1").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("bogus"));
        let e = Scenario::parse("sources = 0.5, -1").unwrap_err();
        assert!(e.message.contains("positive"));
        let e = Scenario::parse("service = erlang(k=0,rate=1)").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("service"));
        assert!(Scenario::parse("just text").is_err());
        assert!(Scenario::parse("sweep = lambda1\ngrid = 0.3, 0.2").is_err());
    }

    #[test]
    fn literals_with_commas_split_correctly() {
        let s = Scenario::parse("service = erlang(k=2,rate=4), h2\n").unwrap();
        assert_eq!(s.services[0], ServiceLaw::Literal(DistributionSpec::erlang(2, 4.0).unwrap()));
        assert_eq!(s.services[1], ServiceLaw::H2);
    }

    #[test]
    fn sweep_transforms() {
        let s = Scenario::parse("preset = fig4\nn_sources = 2\nservice = erlang2\n").unwrap();
        let p = &s.points()[1];
        // rho1 = 0.1 with completion mean 0.5
        assert!((p.params.as_ref().unwrap().lambdas()[0] - 0.2).abs() < 1e-12);

        let s = Scenario::parse("preset = fig6b\nn_sources = 2\nservice = h2\n").unwrap();
        for p in s.points() {
            let st = SteadyState::new(p.params.as_ref().unwrap()).unwrap();
            assert_eq!(p.sweep_value, Some(st.availability()));
            assert_eq!(p.params.as_ref().unwrap().lambdas()[0], p.grid_value.unwrap());
        }

        let s = Scenario::parse("preset = fig6a\nn_sources = 2\nservice = h2\n").unwrap();
        let beta = s.base_service_mean();
        for p in s.points() {
            let (service, repair) = p.params.as_ref().unwrap().shared_laws().unwrap();
            assert!((service.mean() - beta).abs() < 1e-15);
            assert!((repair.mean() - p.grid_value.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn unstable_points_are_kept() {
        let s = Scenario::parse("sources = 0.5\nsweep = lambda1\ngrid = 1, 3\nservice = exp(rate=2)").unwrap();
        let pts = s.points();
        assert_eq!(pts.len(), 2);
        assert!(SteadyState::new(pts[0].params.as_ref().unwrap()).is_ok());
        assert!(SteadyState::new(pts[1].params.as_ref().unwrap()).is_err());
    }
}
