use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::tracker::{classify_arrival, AoiTracker, ArrivalClass};
use super::{Horizon, PacketRecord, ReplicationStats, ServerMode, SimConfig, SourceStats, TraceRecord, PGF_POINTS};
use crate::error::{Error, Result};

const STREAM_SERVICE: u64 = 0;
const STREAM_FAILURE: u64 = 1;
const STREAM_REPAIR: u64 = 2;
const STREAM_ARRIVALS: u64 = 3;

/// Substream for a (replication, purpose) pair. Every parameter point run
/// with the same master seed sees the same streams.
fn stream(master_seed: u64, replication: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((replication << 20) | purpose);
    rng
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    source: usize,
    generation: f64,
    class: Option<ArrivalClass>,
    gap: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct InService {
    packet: Packet,
    start: f64,
    service: f64,
    remaining: f64,
    repairs: f64,
    /// Length of the current uninterrupted service segment, if it ends in a
    /// failure.
    segment: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ServerEvent {
    Completion,
    Failure,
    RepairDone,
}

#[derive(Debug, Default, Clone)]
struct SourceAcc {
    arrivals: u64,
    deliveries: u64,
    sojourn: f64,
    waiting: f64,
    classified: u64,
    delivered_class: u64,
    gap_count: u64,
    cross_xw: f64,
    cycle: f64,
}

#[derive(Debug, Default, Clone)]
struct GlobalAcc {
    idle: f64,
    serving_or_idle: f64,
    size_area: f64,
    pgf: [f64; PGF_POINTS.len()],
    completions: u64,
    completion_sum: f64,
    completion_sq: f64,
}

struct SourceState {
    arrival_clock: Exp<f64>,
    rng: ChaCha8Rng,
    next_arrival: f64,
    in_system: usize,
    last_generation: Option<f64>,
    tracker: AoiTracker,
    acc: SourceAcc,
}

pub(super) struct Simulator<'a> {
    config: &'a SimConfig,
    now: f64,
    mode: ServerMode,
    queue: VecDeque<Packet>,
    current: Option<InService>,
    server_event: Option<(f64, ServerEvent)>,
    failure_clock: Option<Exp<f64>>,
    service_rng: ChaCha8Rng,
    failure_rng: ChaCha8Rng,
    repair_rng: ChaCha8Rng,
    sources: Vec<SourceState>,
    measuring: bool,
    window_start: f64,
    global: GlobalAcc,
    first_deliveries: u64,
    trace: Option<Vec<TraceRecord>>,
    packets: Option<Vec<PacketRecord>>,
}

impl<'a> Simulator<'a> {
    pub(super) fn new(config: &'a SimConfig, replication: u64) -> Result<Self> {
        let seed = config.master_seed;
        let mut sources = Vec::with_capacity(config.params.num_sources());
        for (k, sp) in config.params.sources().iter().enumerate() {
            let arrival_clock = Exp::new(sp.lambda).map_err(|e| Error::Config(e.to_string()))?;
            let mut rng = stream(seed, replication, STREAM_ARRIVALS + k as u64);
            let next_arrival = arrival_clock.sample(&mut rng);
            sources.push(SourceState {
                arrival_clock,
                rng,
                next_arrival,
                in_system: 0,
                last_generation: None,
                tracker: AoiTracker::new(),
                acc: SourceAcc::default(),
            });
        }
        let alpha = config.params.alpha();
        let failure_clock = if alpha > 0.0 { Some(Exp::new(alpha).map_err(|e| Error::Config(e.to_string()))?) } else { None };
        let mut sim = Self {
            config,
            now: 0.0,
            mode: ServerMode::Idle,
            queue: VecDeque::new(),
            current: None,
            server_event: None,
            failure_clock,
            service_rng: stream(seed, replication, STREAM_SERVICE),
            failure_rng: stream(seed, replication, STREAM_FAILURE),
            repair_rng: stream(seed, replication, STREAM_REPAIR),
            sources,
            measuring: false,
            window_start: 0.0,
            global: GlobalAcc::default(),
            first_deliveries: 0,
            trace: config.trace.then(Vec::new),
            packets: config.record_packets.then(Vec::new),
        };
        let no_warmup = match config.horizon {
            Horizon::Deliveries(_) => sim.warmup_deliveries() == 0,
            Horizon::Time(t) => config.warmup_fraction * t == 0.0,
        };
        if no_warmup {
            sim.start_window()?;
        }
        Ok(sim)
    }

    /// Deliveries of the first source discarded before measuring.
    fn warmup_deliveries(&self) -> u64 {
        match self.config.horizon {
            Horizon::Deliveries(n) => (self.config.warmup_fraction * n as f64).floor() as u64,
            Horizon::Time(_) => 0,
        }
    }

    fn in_system_total(&self) -> usize {
        self.queue.len() + usize::from(self.current.is_some())
    }

    /// Integrates time-average statistics over `[now, t]` and moves the
    /// clock.
    fn advance(&mut self, t: f64) {
        let dt = t - self.now;
        if self.measuring && dt > 0.0 {
            let n = self.in_system_total();
            match self.mode {
                ServerMode::Idle => {
                    self.global.idle += dt;
                    self.global.serving_or_idle += dt;
                }
                ServerMode::Serving => self.global.serving_or_idle += dt,
                ServerMode::Repairing => {}
            }
            self.global.size_area += dt * n as f64;
            for (acc, z) in self.global.pgf.iter_mut().zip(PGF_POINTS) {
                *acc += dt * z.powi(n as i32);
            }
        }
        self.now = t;
    }

    fn start_window(&mut self) -> Result<()> {
        self.measuring = true;
        self.window_start = self.now;
        for s in &mut self.sources {
            s.tracker.start_window(self.now)?;
            s.acc = SourceAcc::default();
        }
        self.global = GlobalAcc::default();
        Ok(())
    }

    fn record_trace(&mut self, event: &'static str, source: Option<usize>) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceRecord { time: self.now, event, source, queue_len: self.queue.len(), server_mode: self.mode });
        }
    }

    /// Next event: the pending server event wins ties, then arrivals by
    /// ascending source index.
    fn next_event(&self) -> (f64, Option<usize>) {
        let (mut best_t, mut best_k) = (f64::INFINITY, None);
        for (k, s) in self.sources.iter().enumerate() {
            if s.next_arrival < best_t {
                best_t = s.next_arrival;
                best_k = Some(k);
            }
        }
        match self.server_event {
            Some((ts, _)) if ts <= best_t => (ts, None),
            _ => (best_t, best_k),
        }
    }

    pub(super) fn run(mut self) -> Result<ReplicationStats> {
        let (time_cut, time_end) = match self.config.horizon {
            Horizon::Time(t) => (self.config.warmup_fraction * t, t),
            Horizon::Deliveries(_) => (f64::INFINITY, f64::INFINITY),
        };
        loop {
            let (t, arrival) = self.next_event();
            if !self.measuring && t > time_cut {
                self.advance(time_cut);
                self.start_window()?;
            }
            if t > time_end {
                self.advance(time_end);
                break;
            }
            self.advance(t);
            let done = match arrival {
                Some(k) => {
                    self.arrival(k);
                    false
                }
                None => {
                    let (_, ev) = self.server_event.take().expect("server event pending");
                    match ev {
                        ServerEvent::Completion => self.completion()?,
                        ServerEvent::Failure => {
                            self.failure();
                            false
                        }
                        ServerEvent::RepairDone => {
                            self.repair_done();
                            false
                        }
                    }
                }
            };
            if done {
                break;
            }
        }
        self.finish()
    }

    fn arrival(&mut self, k: usize) {
        let now = self.now;
        let src = &mut self.sources[k];
        let class = classify_arrival(src.in_system, src.last_generation.is_some());
        let gap = src.last_generation.map(|g| now - g);
        src.last_generation = Some(now);
        src.in_system += 1;
        if self.measuring {
            src.acc.arrivals += 1;
        }
        src.next_arrival = now + src.arrival_clock.sample(&mut src.rng);
        let packet = Packet { source: k, generation: now, class, gap };
        if self.mode == ServerMode::Idle {
            self.begin_service(packet);
        } else {
            self.queue.push_back(packet);
        }
        self.record_trace("arrival", Some(k));
    }

    fn begin_service(&mut self, packet: Packet) {
        let service = self.config.params.sources()[packet.source].service.sample(&mut self.service_rng);
        self.current = Some(InService { packet, start: self.now, service, remaining: service, repairs: 0.0, segment: 0.0 });
        self.resume();
    }

    /// Runs the packet at the server with a fresh failure clock.
    fn resume(&mut self) {
        self.mode = ServerMode::Serving;
        let cur = self.current.as_mut().expect("packet at server");
        let lifetime = match &self.failure_clock {
            Some(clock) => clock.sample(&mut self.failure_rng),
            None => f64::INFINITY,
        };
        if cur.remaining <= lifetime {
            self.server_event = Some((self.now + cur.remaining, ServerEvent::Completion));
        } else {
            cur.segment = lifetime;
            self.server_event = Some((self.now + lifetime, ServerEvent::Failure));
        }
    }

    fn failure(&mut self) {
        let cur = self.current.as_mut().expect("failure while serving");
        cur.remaining -= cur.segment;
        let repair = self.config.params.sources()[cur.packet.source].repair.sample(&mut self.repair_rng);
        cur.repairs += repair;
        self.mode = ServerMode::Repairing;
        let source = cur.packet.source;
        self.server_event = Some((self.now + repair, ServerEvent::RepairDone));
        self.record_trace("failure", Some(source));
    }

    fn repair_done(&mut self) {
        let source = self.current.as_ref().map(|c| c.packet.source);
        self.resume();
        self.record_trace("repair_complete", source);
    }

    /// Returns whether the horizon has been reached.
    fn completion(&mut self) -> Result<bool> {
        let cur = self.current.take().expect("completion while serving");
        let now = self.now;
        let p = cur.packet;
        let sojourn = now - p.generation;
        let waiting = cur.start - p.generation;
        let completion = now - cur.start;
        debug_assert!(
            (completion - cur.service - cur.repairs).abs() <= 1e-9 * completion.max(1.0),
            "service {} + repairs {} != completion {completion}",
            cur.service,
            cur.repairs
        );
        let src = &mut self.sources[p.source];
        src.in_system -= 1;
        src.tracker.record_delivery(now, p.generation)?;
        if self.measuring {
            let acc = &mut src.acc;
            acc.deliveries += 1;
            acc.sojourn += sojourn;
            acc.waiting += waiting;
            if let Some(class) = p.class {
                acc.classified += 1;
                if class == ArrivalClass::PreviousDelivered {
                    acc.delivered_class += 1;
                }
            }
            if let Some(x) = p.gap {
                acc.gap_count += 1;
                acc.cross_xw += x * waiting;
                acc.cycle += 0.5 * x * x + x * sojourn;
            }
            self.global.completions += 1;
            self.global.completion_sum += completion;
            self.global.completion_sq += completion * completion;
        }
        if let Some(log) = self.packets.as_mut() {
            log.push(PacketRecord {
                source: p.source,
                generation: p.generation,
                start: cur.start,
                delivery: now,
                service: cur.service,
                repairs: cur.repairs,
                class: p.class,
                gap: p.gap,
            });
        }

        match self.queue.pop_front() {
            Some(next) => self.begin_service(next),
            None => self.mode = ServerMode::Idle,
        }
        self.record_trace("departure", Some(p.source));

        if p.source == 0 {
            self.first_deliveries += 1;
            if let Horizon::Deliveries(n) = self.config.horizon {
                if !self.measuring && self.first_deliveries >= self.warmup_deliveries() {
                    self.start_window()?;
                }
                return Ok(self.first_deliveries >= n);
            }
        }
        Ok(false)
    }

    fn finish(mut self) -> Result<ReplicationStats> {
        if !self.measuring {
            self.start_window()?;
        }
        let end = self.now;
        let elapsed = end - self.window_start;
        let per_time = |x: f64| if elapsed > 0.0 { x / elapsed } else { f64::NAN };
        let ratio = |x: f64, n: u64| if n > 0 { x / n as f64 } else { f64::NAN };

        let mut sources = Vec::with_capacity(self.sources.len());
        for s in &mut self.sources {
            s.tracker.advance(end)?;
            let a = &s.acc;
            let arrival_rate = per_time(a.arrivals as f64);
            sources.push(SourceStats {
                aaoi: per_time(s.tracker.area()),
                aaoi_cycle: arrival_rate * ratio(a.cycle, a.gap_count),
                mean_sojourn: ratio(a.sojourn, a.deliveries),
                mean_waiting: ratio(a.waiting, a.deliveries),
                p_l: ratio(a.delivered_class as f64, a.classified),
                cross_xw: ratio(a.cross_xw, a.gap_count),
                deliveries: a.deliveries,
                arrivals: a.arrivals,
            });
        }
        let g = &self.global;
        Ok(ReplicationStats {
            sources,
            idle_fraction: per_time(g.idle),
            availability_fraction: per_time(g.serving_or_idle),
            mean_system_size: per_time(g.size_area),
            pgf: g.pgf.map(per_time),
            mean_completion: ratio(g.completion_sum, g.completions),
            completion_second_moment: ratio(g.completion_sq, g.completions),
            elapsed,
            trace: self.trace,
            packets: self.packets,
        })
    }
}
