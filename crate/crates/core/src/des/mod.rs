//! Discrete-event simulation of the multi-source FCFS queue with active
//! breakdowns and preemptive-resume repair.
//!
//! Failures strike only while a packet is being served. The remaining
//! service is frozen for the repair and resumed afterwards with a fresh
//! exponential failure clock. The AoI of every source is integrated exactly
//! and all time averages are taken over a window that starts after a warmup
//! cut.
//!
//! Each replication draws from its own named substreams (one per arrival
//! source, plus service, failure and repair), derived from the master seed
//! and the replication index, so results are reproducible bit for bit and
//! parameter points run under common random numbers.

mod engine;
pub mod tracker;

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

pub use tracker::{classify_arrival, AoiTracker, ArrivalClass};

use crate::error::{Error, Result};
use crate::stats::Estimate;
use crate::transforms::SystemParams;

/// Points at which the time-average system-size pgf is sampled.
pub const PGF_POINTS: [f64; 3] = [0.3, 0.6, 0.9];

/// Server states: idle, serving a packet, or under repair with a packet
/// frozen at the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServerMode {
    Idle,
    Serving,
    Repairing,
}

impl fmt::Display for ServerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ServerMode::Idle => "idle",
            ServerMode::Serving => "serving",
            ServerMode::Repairing => "repairing",
        })
    }
}

/// Run length of one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Stop at this many deliveries of the first source.
    Deliveries(u64),
    /// Stop at this simulated time.
    Time(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: SystemParams,
    pub horizon: Horizon,
    /// Leading fraction of the horizon discarded before measuring.
    pub warmup_fraction: f64,
    pub replications: usize,
    pub master_seed: u64,
    /// Keep an event trace (for debugging; large).
    pub trace: bool,
    /// Keep every delivered packet's timing record.
    pub record_packets: bool,
}

pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;
pub const DEFAULT_HORIZON: Horizon = Horizon::Deliveries(100_000);

impl SimConfig {
    pub fn new(params: SystemParams) -> Self {
        Self {
            params,
            horizon: DEFAULT_HORIZON,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            replications: 1,
            master_seed: 0,
            trace: false,
            record_packets: false,
        }
    }

    pub fn horizon(mut self, horizon: Horizon) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn replications(mut self, n: usize) -> Self {
        self.replications = n;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn warmup(mut self, fraction: f64) -> Self {
        self.warmup_fraction = fraction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.horizon {
            Horizon::Deliveries(0) => return Err(Error::Config("horizon must be positive".into())),
            Horizon::Time(t) if !(t > 0.0 && t.is_finite()) => return Err(Error::Config(format!("horizon must be positive, got {t}"))),
            _ => {}
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config(format!("warmup fraction must lie in [0, 1), got {}", self.warmup_fraction)));
        }
        if self.replications == 0 {
            return Err(Error::Config("at least one replication is required".into()));
        }
        if self.params.num_sources() >= 1 << 16 {
            return Err(Error::Config("too many sources".into()));
        }
        Ok(())
    }
}

/// One line of the optional event trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub event: &'static str,
    pub source: Option<usize>,
    /// Packets waiting, excluding the one at the server.
    pub queue_len: usize,
    pub server_mode: ServerMode,
}

pub const TRACE_HEADER: &str = "time,event_type,source,queue_len,server_mode";

/// Writes a trace as CSV; sources are numbered from 1.
pub fn write_trace<W: Write>(mut out: W, trace: &[TraceRecord]) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in trace {
        let source = r.source.map(|k| (k + 1).to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", r.time, r.event, source, r.queue_len, r.server_mode)?;
    }
    Ok(())
}

/// Timing of one delivered packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub source: usize,
    pub generation: f64,
    pub start: f64,
    pub delivery: f64,
    pub service: f64,
    /// Sum of repair times during this packet's service.
    pub repairs: f64,
    pub class: Option<ArrivalClass>,
    /// Time since the previous generation of the same source.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceStats {
    /// Area under the AoI curve over the window divided by its length.
    pub aaoi: f64,
    /// Arrival rate times the mean of `X²/2 + X T` over delivered packets.
    pub aaoi_cycle: f64,
    pub mean_sojourn: f64,
    pub mean_waiting: f64,
    /// Fraction of classified packets whose predecessor had already left.
    pub p_l: f64,
    /// Mean of `X W` over delivered packets with a predecessor.
    pub cross_xw: f64,
    pub deliveries: u64,
    pub arrivals: u64,
}

/// Statistics of a single replication's measurement window.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationStats {
    pub sources: Vec<SourceStats>,
    pub idle_fraction: f64,
    /// Fraction of time the server is not under repair.
    pub availability_fraction: f64,
    pub mean_system_size: f64,
    /// Time average of `z^N(t)` at each of [`PGF_POINTS`].
    pub pgf: [f64; PGF_POINTS.len()],
    /// Mean service time including repairs.
    pub mean_completion: f64,
    pub completion_second_moment: f64,
    pub elapsed: f64,
    pub trace: Option<Vec<TraceRecord>>,
    pub packets: Option<Vec<PacketRecord>>,
}

/// Runs replication `index`; the result depends only on `(config, index)`.
pub fn run_replication(config: &SimConfig, index: usize) -> Result<ReplicationStats> {
    config.validate()?;
    if index >= config.replications {
        return Err(Error::Config(format!("replication {index} out of range (replications = {})", config.replications)));
    }
    engine::Simulator::new(config, index as u64)?.run()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceEstimates {
    pub aaoi: Estimate,
    pub aaoi_cycle: Estimate,
    pub mean_sojourn: Estimate,
    pub mean_waiting: Estimate,
    pub p_l: Estimate,
    pub cross_xw: Estimate,
    pub deliveries: u64,
}

/// Replication means with 95% confidence intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub replications: usize,
    pub sources: Vec<SourceEstimates>,
    pub idle_fraction: Estimate,
    pub availability_fraction: Estimate,
    pub mean_system_size: Estimate,
    pub pgf: Vec<(f64, Estimate)>,
    pub mean_completion: Estimate,
    pub completion_second_moment: Estimate,
}

impl SimulationReport {
    /// Aggregates replications in index order.
    pub fn aggregate(reps: &[ReplicationStats]) -> Self {
        let est = |f: &dyn Fn(&ReplicationStats) -> f64| Estimate::from_samples(&reps.iter().map(f).collect::<Vec<_>>());
        let n_sources = reps.first().map_or(0, |r| r.sources.len());
        let sources = (0..n_sources)
            .map(|k| SourceEstimates {
                aaoi: est(&|r| r.sources[k].aaoi),
                aaoi_cycle: est(&|r| r.sources[k].aaoi_cycle),
                mean_sojourn: est(&|r| r.sources[k].mean_sojourn),
                mean_waiting: est(&|r| r.sources[k].mean_waiting),
                p_l: est(&|r| r.sources[k].p_l),
                cross_xw: est(&|r| r.sources[k].cross_xw),
                deliveries: reps.iter().map(|r| r.sources[k].deliveries).sum(),
            })
            .collect();
        Self {
            replications: reps.len(),
            sources,
            idle_fraction: est(&|r| r.idle_fraction),
            availability_fraction: est(&|r| r.availability_fraction),
            mean_system_size: est(&|r| r.mean_system_size),
            pgf: PGF_POINTS.iter().enumerate().map(|(i, &z)| (z, est(&|r| r.pgf[i]))).collect(),
            mean_completion: est(&|r| r.mean_completion),
            completion_second_moment: est(&|r| r.completion_second_moment),
        }
    }
}

/// Runs every replication (in parallel) and aggregates them in index order.
pub fn run_experiment(config: &SimConfig) -> Result<SimulationReport> {
    config.validate()?;
    let reps =
        (0..config.replications).into_par_iter().map(|i| engine::Simulator::new(config, i as u64)?.run()).collect::<Result<Vec<_>>>()?;
    Ok(SimulationReport::aggregate(&reps))
}
