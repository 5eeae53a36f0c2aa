//! Event-driven simulator of the ideal CSMA network.
//!
//! Time is measured in mean transmission durations. A link counts down an
//! exponential backoff timer of mean `1/rho_i` while none of its neighbors
//! transmits; the timer freezes while the channel around it is busy and
//! resumes with its remaining time. At expiry the link transmits for a duration
//! drawn from the configured distribution, then draws a fresh timer.
//!
//! In offered-load mode packets arrive as a Poisson process of rate `f_i`
//! into an unbounded buffer, and a link with an empty buffer leaves the
//! competition until its next arrival.
//!
//! Randomness comes from ChaCha8 seeded with [`SimConfig::seed`]; replication
//! `r` uses ChaCha stream `r` of the same key, so replications are independent
//! and each is reproducible on its own.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::eai::OfferedLoad;
use crate::error::{Error, Result};
use crate::graph::ContentionGraph;
use crate::icn::AccessIntensities;

#[derive(Debug, Clone, PartialEq)]
pub enum SimMode {
    Saturated,
    OfferedLoad(OfferedLoad<f64>),
}

/// Transmission-duration distributions, all with unit mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransmissionDistribution {
    Exponential,
    /// Uniform on `[0, 2]`.
    Uniform,
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub mode: SimMode,
    pub rho: AccessIntensities<f64>,
    pub transmission: TransmissionDistribution,
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
}

impl SimConfig {
    /// Saturated run with the default warmup of 10% of the horizon.
    pub fn saturated(rho: AccessIntensities<f64>, horizon: f64, seed: u64) -> Self {
        SimConfig {
            mode: SimMode::Saturated,
            rho,
            transmission: TransmissionDistribution::Exponential,
            horizon,
            warmup: 0.1 * horizon,
            seed,
        }
    }

    pub fn offered_load(rho: AccessIntensities<f64>, loads: OfferedLoad<f64>, horizon: f64, seed: u64) -> Self {
        SimConfig { mode: SimMode::OfferedLoad(loads), ..Self::saturated(rho, horizon, seed) }
    }

    pub fn with_transmission(mut self, transmission: TransmissionDistribution) -> Self {
        self.transmission = transmission;
        self
    }

    pub fn with_warmup(mut self, warmup: f64) -> Self {
        self.warmup = warmup;
        self
    }

    fn validate(&self, graph: &ContentionGraph) -> Result<()> {
        let n = graph.num_links();
        if self.rho.len() != n {
            return Err(Error::InvalidConfig(format!("{} intensities for {n} links", self.rho.len())));
        }
        if let SimMode::OfferedLoad(f) = &self.mode {
            if f.len() != n {
                return Err(Error::InvalidConfig(format!("{} loads for {n} links", f.len())));
            }
        }
        if !(self.horizon.is_finite() && self.warmup.is_finite()) {
            return Err(Error::InvalidConfig("horizon and warmup must be finite".into()));
        }
        if !(self.warmup >= 0.0 && self.horizon > self.warmup) {
            return Err(Error::InvalidConfig(format!(
                "need horizon > warmup >= 0 (horizon {}, warmup {})",
                self.horizon, self.warmup
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub airtime_fraction: Vec<f64>,
    pub transmissions: Vec<u64>,
    /// Packet arrivals after warmup; all zero in saturated mode.
    pub arrivals: Vec<u64>,
    pub queue_nonempty_fraction: Vec<f64>,
    /// Length of the measured interval.
    pub elapsed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Countdown { generation: u64 },
    TransmissionEnd,
    Arrival,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    link: usize,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so that BinaryHeap pops the earliest (time, seq) first.
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy)]
enum Timer {
    /// No backoff pending: buffer empty or transmitting.
    None,
    /// Remaining countdown, stopped because a neighbor is busy.
    Frozen(f64),
    /// Counting down; expires at the given time.
    Running(f64),
}

struct Link {
    timer: Timer,
    generation: u64,
    transmitting: bool,
    tx_start: f64,
    busy_neighbors: u32,
    queue: u64,
    nonempty_since: f64,
    busy_time: f64,
    nonempty_time: f64,
    transmissions: u64,
    arrivals: u64,
}

struct Simulator<'a> {
    graph: &'a ContentionGraph,
    config: &'a SimConfig,
    rng: ChaCha8Rng,
    countdown: Vec<Exp<f64>>,
    arrival: Vec<Option<Exp<f64>>>,
    links: Vec<Link>,
    queue: BinaryHeap<Event>,
    seq: u64,
    now: f64,
}

fn overlap(start: f64, end: f64, lo: f64, hi: f64) -> f64 {
    (end.min(hi) - start.max(lo)).max(0.0)
}

impl<'a> Simulator<'a> {
    fn new(graph: &'a ContentionGraph, config: &'a SimConfig, stream: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(stream);
        let countdown = config
            .rho
            .as_slice()
            .iter()
            .map(|&r| Exp::new(r).map_err(|e| Error::InvalidConfig(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let arrival = match &config.mode {
            SimMode::Saturated => vec![None; graph.num_links()],
            SimMode::OfferedLoad(f) => f
                .as_slice()
                .iter()
                .map(|&rate| (rate > 0.0).then(|| Exp::new(rate).expect("positive rate")))
                .collect(),
        };
        let saturated = matches!(config.mode, SimMode::Saturated);
        let links = (0..graph.num_links())
            .map(|_| Link {
                timer: Timer::None,
                generation: 0,
                transmitting: false,
                tx_start: 0.0,
                busy_neighbors: 0,
                queue: u64::from(saturated),
                nonempty_since: 0.0,
                busy_time: 0.0,
                nonempty_time: 0.0,
                transmissions: 0,
                arrivals: 0,
            })
            .collect();
        Ok(Simulator { graph, config, rng, countdown, arrival, links, queue: BinaryHeap::new(), seq: 0, now: 0.0 })
    }

    fn saturated(&self) -> bool {
        matches!(self.config.mode, SimMode::Saturated)
    }

    fn push(&mut self, time: f64, link: usize, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Event { time, seq: self.seq, link, kind });
    }

    fn transmission_time(&mut self) -> f64 {
        match self.config.transmission {
            TransmissionDistribution::Exponential => Exp::new(1.0).expect("unit rate").sample(&mut self.rng),
            TransmissionDistribution::Uniform => self.rng.random_range(0.0..2.0),
            TransmissionDistribution::Constant => 1.0,
        }
    }

    /// Draws a fresh backoff and starts it if the link can count down.
    fn arm(&mut self, i: usize) {
        let remaining = self.countdown[i].sample(&mut self.rng);
        self.links[i].timer = Timer::Frozen(remaining);
        self.resume(i);
    }

    fn resume(&mut self, i: usize) {
        let link = &mut self.links[i];
        if link.busy_neighbors > 0 || link.transmitting {
            return;
        }
        if let Timer::Frozen(remaining) = link.timer {
            link.generation += 1;
            let at = self.now + remaining;
            link.timer = Timer::Running(at);
            let generation = link.generation;
            self.push(at, i, EventKind::Countdown { generation });
        }
    }

    fn freeze(&mut self, i: usize) {
        let link = &mut self.links[i];
        if let Timer::Running(at) = link.timer {
            link.timer = Timer::Frozen((at - self.now).max(0.0));
            link.generation += 1;
        }
    }

    fn run(mut self) -> Result<SimResult> {
        let n = self.graph.num_links();
        let (warmup, horizon) = (self.config.warmup, self.config.horizon);
        for i in 0..n {
            if self.saturated() {
                self.arm(i);
            } else if let Some(exp) = self.arrival[i] {
                let at = exp.sample(&mut self.rng);
                self.push(at, i, EventKind::Arrival);
            }
        }
        let mut transmitting: u64 = 0;

        while let Some(event) = self.queue.pop() {
            if event.time > horizon {
                break;
            }
            self.now = event.time;
            let i = event.link;
            match event.kind {
                EventKind::Countdown { generation } => {
                    if generation != self.links[i].generation || !matches!(self.links[i].timer, Timer::Running(_)) {
                        continue;
                    }
                    let nbrs = self.graph.neighbors(i);
                    if nbrs.bits() & transmitting != 0 {
                        return Err(Error::InvariantViolation(format!(
                            "link {} started while a neighbor was transmitting at t={}",
                            i + 1,
                            self.now
                        )));
                    }
                    let link = &mut self.links[i];
                    link.timer = Timer::None;
                    link.transmitting = true;
                    link.tx_start = self.now;
                    transmitting |= 1u64 << i;
                    let end = self.now + self.transmission_time();
                    self.push(end, i, EventKind::TransmissionEnd);
                    for j in nbrs.iter() {
                        self.links[j].busy_neighbors += 1;
                        self.freeze(j);
                    }
                }
                EventKind::TransmissionEnd => {
                    let saturated = self.saturated();
                    let now = self.now;
                    let link = &mut self.links[i];
                    link.transmitting = false;
                    transmitting &= !(1u64 << i);
                    link.busy_time += overlap(link.tx_start, now, warmup, horizon);
                    if link.tx_start >= warmup {
                        link.transmissions += 1;
                    }
                    if !saturated {
                        link.queue -= 1;
                        if link.queue == 0 {
                            link.nonempty_time += overlap(link.nonempty_since, now, warmup, horizon);
                        }
                    }
                    let has_packet = link.queue > 0;
                    for j in self.graph.neighbors(i).iter() {
                        self.links[j].busy_neighbors -= 1;
                        self.resume(j);
                    }
                    if has_packet {
                        self.arm(i);
                    }
                }
                EventKind::Arrival => {
                    let now = self.now;
                    let link = &mut self.links[i];
                    link.queue += 1;
                    if now >= warmup {
                        link.arrivals += 1;
                    }
                    let first = link.queue == 1;
                    if first {
                        link.nonempty_since = now;
                    }
                    let exp = self.arrival[i].expect("arrivals only on loaded links");
                    let next = now + exp.sample(&mut self.rng);
                    self.push(next, i, EventKind::Arrival);
                    if first {
                        self.arm(i);
                    }
                }
            }
        }

        let elapsed = horizon - warmup;
        let saturated = self.saturated();
        let links = &mut self.links;
        for link in links.iter_mut() {
            if link.transmitting {
                link.busy_time += overlap(link.tx_start, horizon, warmup, horizon);
            }
            if saturated {
                link.nonempty_time = elapsed;
            } else if link.queue > 0 {
                link.nonempty_time += overlap(link.nonempty_since, horizon, warmup, horizon);
            }
        }
        Ok(SimResult {
            airtime_fraction: links.iter().map(|l| l.busy_time / elapsed).collect(),
            transmissions: links.iter().map(|l| l.transmissions).collect(),
            arrivals: links.iter().map(|l| l.arrivals).collect(),
            queue_nonempty_fraction: links.iter().map(|l| l.nonempty_time / elapsed).collect(),
            elapsed,
        })
    }
}

/// Runs one simulation on stream 0 of the configured seed.
pub fn run_icn_simulation(graph: &ContentionGraph, config: &SimConfig) -> Result<SimResult> {
    run_on_stream(graph, config, 0)
}

/// Runs one simulation on the given RNG stream of the configured seed.
pub fn run_on_stream(graph: &ContentionGraph, config: &SimConfig, stream: u64) -> Result<SimResult> {
    config.validate(graph)?;
    Simulator::new(graph, config, stream)?.run()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub mean_airtime: Vec<f64>,
    /// Sample standard deviation across replications; zero for one run.
    pub std_airtime: Vec<f64>,
    pub runs: Vec<SimResult>,
}

impl Replication {
    /// Standard error of each link's mean airtime.
    pub fn standard_error(&self) -> Vec<f64> {
        let k = self.runs.len() as f64;
        self.std_airtime.iter().map(|s| s / k.sqrt()).collect()
    }
}

/// Runs `num_reps` replications on streams `0..num_reps`, in parallel.
pub fn replicate(graph: &ContentionGraph, config: &SimConfig, num_reps: usize) -> Result<Replication> {
    if num_reps == 0 {
        return Err(Error::InvalidConfig("at least one replication is required".into()));
    }
    let streams: Vec<u64> = (0..num_reps as u64).collect();
    replicate_streams(graph, config, &streams)
}

/// Runs one replication per listed stream and aggregates them in order.
pub fn replicate_streams(graph: &ContentionGraph, config: &SimConfig, streams: &[u64]) -> Result<Replication> {
    if streams.is_empty() {
        return Err(Error::InvalidConfig("at least one replication is required".into()));
    }
    config.validate(graph)?;
    let runs = streams
        .par_iter()
        .map(|&s| run_on_stream(graph, config, s))
        .collect::<Result<Vec<_>>>()?;
    let n = graph.num_links();
    let k = runs.len() as f64;
    let mean: Vec<f64> = (0..n).map(|i| runs.iter().map(|r| r.airtime_fraction[i]).sum::<f64>() / k).collect();
    let std = (0..n)
        .map(|i| {
            if runs.len() < 2 {
                return 0.0;
            }
            let ss: f64 = runs.iter().map(|r| (r.airtime_fraction[i] - mean[i]).powi(2)).sum();
            (ss / (k - 1.0)).sqrt()
        })
        .collect();
    Ok(Replication { mean_airtime: mean, std_airtime: std, runs })
}
