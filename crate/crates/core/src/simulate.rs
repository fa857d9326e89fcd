//! Discrete-event simulation of drivers circulating between loss queues.
//!
//! Exogenous drivers arrive at each block-face as a Poisson stream. A driver
//! who finds a free stall parks for a random duration with mean `1/mu`;
//! otherwise the driver is rejected, drives along an out-edge chosen by the
//! routing weights, and tries again one `edge_delay` later. Nothing here
//! assumes the rejection streams are Poisson, which makes the simulator an
//! independent check on the analytic network solution.
//!
//! One run is one event loop driven by one seeded generator, so a fixed seed
//! reproduces a run bit for bit. Confidence intervals within a run come from
//! batch means; across replications from the replication means.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::loss_queue::QueueParams;
use crate::network::Network;

/// Parking-duration distribution, always with mean `1/mu`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServiceDist {
    #[default]
    Exponential,
    Deterministic,
    LogNormal {
        #[serde(default = "default_cv")]
        cv: f64,
    },
}

fn default_cv() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Simulated hours.
    pub horizon: f64,
    /// Hours discarded before statistics are collected.
    pub warmup: f64,
    pub seed: u64,
    pub service: ServiceDist,
    /// Travel time of one hop between block-faces, in hours.
    pub edge_delay: f64,
    /// Drivers rejected after this many hops give up.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_hops: Option<u32>,
    pub replications: usize,
    /// Batches per run for batch-means intervals.
    pub batches: usize,
    /// Abort when circulating drivers exceed this multiple of total stalls.
    pub watchdog_factor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 10_000.0,
            warmup: 100.0,
            seed: 0,
            service: ServiceDist::default(),
            edge_delay: 1.0 / 60.0,
            max_hops: None,
            replications: 1,
            batches: 20,
            watchdog_factor: 100.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if !(self.warmup.is_finite() && self.warmup >= 0.0) {
            return bad(format!("warmup must be non-negative, got {}", self.warmup));
        }
        if !(self.horizon.is_finite() && self.horizon > self.warmup) {
            return bad(format!(
                "horizon {} must exceed warmup {}",
                self.horizon, self.warmup
            ));
        }
        if !(self.edge_delay.is_finite() && self.edge_delay > 0.0) {
            return bad(format!("edge_delay must be positive, got {}", self.edge_delay));
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.batches < 2 {
            return bad("at least two batches are needed for an interval".into());
        }
        if let ServiceDist::LogNormal { cv } = self.service {
            if !(cv.is_finite() && cv > 0.0) {
                return bad(format!("lognormal cv must be positive, got {cv}"));
            }
        }
        if !(self.watchdog_factor > 0.0) {
            return bad("watchdog_factor must be positive".into());
        }
        Ok(())
    }
}

/// Point estimate with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self::default();
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self {
                mean,
                half_width: 0.0,
            };
        }
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(1.96);
        Self {
            mean,
            half_width: t * (var / n as f64).sqrt(),
        }
    }

    /// `|value - mean|` in units of the half-width.
    pub fn deviation(&self, value: f64) -> f64 {
        (value - self.mean).abs() / self.half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFlowEstimate {
    pub from: String,
    pub to: String,
    /// Traversals per hour.
    pub rate: Estimate,
}

/// Where every generated driver ended up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriverAccounting {
    pub arrivals: u64,
    pub parked: u64,
    /// Still driving between block-faces at the end of the run.
    pub circulating: u64,
    pub hop_capped: u64,
    /// Rejected at a block with no out-edges.
    pub exited: u64,
}

impl DriverAccounting {
    pub fn balanced(&self) -> bool {
        self.parked + self.circulating + self.hop_capped + self.exited == self.arrivals
    }

    fn add(&mut self, other: &Self) {
        self.arrivals += other.arrivals;
        self.parked += other.parked;
        self.circulating += other.circulating;
        self.hop_capped += other.hop_capped;
        self.exited += other.exited;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub ids: Vec<String>,
    /// Time-average fraction of stalls in use.
    pub occupancy: Vec<Estimate>,
    /// Fraction of parking attempts (exogenous and circulating) rejected.
    pub blocking: Vec<Estimate>,
    /// Rejections per hour.
    pub rejection_rate: Vec<Estimate>,
    pub edge_flow: Vec<EdgeFlowEstimate>,
    /// `hop_histogram[h]` drivers parked after `h` hops.
    pub hop_histogram: Vec<u64>,
    pub accounting: DriverAccounting,
    pub replications: usize,
    /// Post-warmup hours behind each replication's statistics.
    pub observed_hours: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    Exogenous { block: usize },
    Departure { block: usize },
    Attempt { block: usize, hops: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
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

impl Ord for Event {
    // reversed: BinaryHeap pops the earliest (time, seq) first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

enum Service {
    Exponential(Vec<Exp<f64>>),
    Deterministic(Vec<f64>),
    LogNormal(Vec<LogNormal<f64>>),
}

impl Service {
    fn new(dist: ServiceDist, params: &[QueueParams]) -> Result<Self> {
        Ok(match dist {
            ServiceDist::Exponential => Service::Exponential(
                params
                    .iter()
                    .map(|p| Exp::new(p.mu()).map_err(|e| Error::invalid(e.to_string())))
                    .collect::<Result<_>>()?,
            ),
            ServiceDist::Deterministic => {
                Service::Deterministic(params.iter().map(|p| 1.0 / p.mu()).collect())
            }
            ServiceDist::LogNormal { cv } => {
                let sigma2 = (1.0 + cv * cv).ln();
                Service::LogNormal(
                    params
                        .iter()
                        .map(|p| {
                            let location = (1.0 / p.mu()).ln() - 0.5 * sigma2;
                            LogNormal::new(location, sigma2.sqrt())
                                .map_err(|e| Error::invalid(e.to_string()))
                        })
                        .collect::<Result<_>>()?,
                )
            }
        })
    }

    fn sample(&self, block: usize, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Service::Exponential(d) => d[block].sample(rng),
            Service::Deterministic(d) => d[block],
            Service::LogNormal(d) => d[block].sample(rng),
        }
    }
}

/// Per-batch accumulators over the observation window.
struct Window {
    start: f64,
    batch_len: f64,
    batches: usize,
}

impl Window {
    /// Add `level * |[from, to] ∩ batch|` to each batch.
    fn integrate(&self, acc: &mut [f64], from: f64, to: f64, level: f64) {
        if level == 0.0 {
            return;
        }
        let end = self.start + self.batch_len * self.batches as f64;
        let (from, to) = (from.max(self.start), to.min(end));
        if to <= from {
            return;
        }
        let first = (((from - self.start) / self.batch_len) as usize).min(self.batches - 1);
        for (b, slot) in acc.iter_mut().enumerate().skip(first) {
            let lo = self.start + b as f64 * self.batch_len;
            let hi = lo + self.batch_len;
            if lo >= to {
                break;
            }
            let overlap = to.min(hi) - from.max(lo);
            if overlap > 0.0 {
                *slot += level * overlap;
            }
        }
    }

    fn batch_of(&self, t: f64) -> Option<usize> {
        if t < self.start {
            return None;
        }
        let b = ((t - self.start) / self.batch_len) as usize;
        (b < self.batches).then_some(b)
    }
}

struct Engine<'a> {
    network: &'a Network,
    config: &'a SimConfig,
    rng: ChaCha8Rng,
    service: Service,
    arrivals: Vec<Option<Exp<f64>>>,
    heap: BinaryHeap<Event>,
    seq: u64,
    busy: Vec<u32>,
    last_change: Vec<f64>,
    window: Window,
    area: Vec<Vec<f64>>,
    attempts: Vec<Vec<u64>>,
    rejections: Vec<Vec<u64>>,
    edge_index: Vec<Vec<usize>>,
    traversals: Vec<Vec<u64>>,
    hops: Vec<u64>,
    accounting: DriverAccounting,
    circulating: u64,
}

impl<'a> Engine<'a> {
    fn new(network: &'a Network, config: &'a SimConfig, seed: u64) -> Result<Self> {
        let lambda = network.exogenous_rates()?;
        let params: Vec<QueueParams> = network.blocks().iter().map(|b| b.params).collect();
        let n = params.len();
        let batches = config.batches;
        let window = Window {
            start: config.warmup,
            batch_len: (config.horizon - config.warmup) / batches as f64,
            batches,
        };
        let routing = network.routing();
        let mut edge_index = Vec::with_capacity(n);
        let mut edges = 0;
        for i in 0..n {
            let row: Vec<usize> = (edges..edges + routing.outgoing(i).len()).collect();
            edges += row.len();
            edge_index.push(row);
        }
        let arrivals = lambda
            .iter()
            .map(|l| if *l > 0.0 { Exp::new(*l).ok() } else { None })
            .collect();
        Ok(Self {
            network,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            service: Service::new(config.service, &params)?,
            arrivals,
            heap: BinaryHeap::new(),
            seq: 0,
            busy: vec![0; n],
            last_change: vec![0.0; n],
            window,
            area: vec![vec![0.0; batches]; n],
            attempts: vec![vec![0; batches]; n],
            rejections: vec![vec![0; batches]; n],
            edge_index,
            traversals: vec![vec![0; batches]; edges],
            hops: Vec::new(),
            accounting: DriverAccounting::default(),
            circulating: 0,
        })
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn schedule_exogenous(&mut self, block: usize, now: f64) {
        if let Some(d) = self.arrivals[block] {
            let t = now + d.sample(&mut self.rng);
            self.push(t, EventKind::Exogenous { block });
        }
    }

    fn set_busy(&mut self, block: usize, now: f64, busy: u32) {
        let level = f64::from(self.busy[block]);
        self.window
            .integrate(&mut self.area[block], self.last_change[block], now, level);
        self.last_change[block] = now;
        self.busy[block] = busy;
    }

    fn attempt(&mut self, block: usize, hops: u32, now: f64) {
        let batch = self.window.batch_of(now);
        if let Some(b) = batch {
            self.attempts[block][b] += 1;
        }
        let k = self.network.blocks()[block].params.k();
        if self.busy[block] < k {
            self.set_busy(block, now, self.busy[block] + 1);
            let stay = self.service.sample(block, &mut self.rng);
            self.push(now + stay, EventKind::Departure { block });
            self.accounting.parked += 1;
            let h = hops as usize;
            if self.hops.len() <= h {
                self.hops.resize(h + 1, 0);
            }
            self.hops[h] += 1;
            return;
        }

        if let Some(b) = batch {
            self.rejections[block][b] += 1;
        }
        let out = self.network.routing().outgoing(block);
        if out.is_empty() {
            self.accounting.exited += 1;
            return;
        }
        if self.config.max_hops.is_some_and(|m| hops >= m) {
            self.accounting.hop_capped += 1;
            return;
        }
        let draw: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut choice = out.len() - 1;
        for (e, (_, w)) in out.iter().enumerate() {
            acc += w;
            if draw < acc {
                choice = e;
                break;
            }
        }
        let (next, _) = out[choice];
        if let Some(b) = batch {
            self.traversals[self.edge_index[block][choice]][b] += 1;
        }
        self.circulating += 1;
        self.push(
            now + self.config.edge_delay,
            EventKind::Attempt {
                block: next,
                hops: hops + 1,
            },
        );
    }

    fn run(mut self) -> Result<SimResult> {
        let n = self.busy.len();
        for i in 0..n {
            self.schedule_exogenous(i, 0.0);
        }
        let total_stalls: u64 = self
            .network
            .blocks()
            .iter()
            .map(|b| u64::from(b.params.k()))
            .sum();
        let bound = (self.config.watchdog_factor * total_stalls as f64).ceil() as u64;

        while let Some(ev) = self.heap.peek().copied() {
            if ev.time > self.config.horizon {
                break;
            }
            self.heap.pop();
            match ev.kind {
                EventKind::Exogenous { block } => {
                    self.accounting.arrivals += 1;
                    self.schedule_exogenous(block, ev.time);
                    self.attempt(block, 0, ev.time);
                }
                EventKind::Departure { block } => {
                    self.set_busy(block, ev.time, self.busy[block] - 1);
                }
                EventKind::Attempt { block, hops } => {
                    self.circulating -= 1;
                    self.attempt(block, hops, ev.time);
                }
            }
            if self.circulating > bound {
                let circulating = self.circulating as usize;
                let partial = self.finish(ev.time);
                return Err(Error::Overload {
                    circulating,
                    bound: bound as usize,
                    partial: Box::new(partial),
                });
            }
        }
        let end = self.config.horizon;
        Ok(self.finish(end))
    }

    fn finish(mut self, end: f64) -> SimResult {
        for i in 0..self.busy.len() {
            let busy = self.busy[i];
            self.set_busy(i, end, busy);
        }
        self.accounting.circulating = self.circulating;

        let window = &self.window;
        let observed = (end - window.start).max(0.0);
        // only batches fully inside [warmup, end] contribute
        let complete = ((observed / window.batch_len + 1e-9) as usize).min(window.batches);
        let len = window.batch_len;

        let blocks = self.network.blocks();
        let occupancy = blocks
            .iter()
            .zip(&self.area)
            .map(|(b, area)| {
                let k = f64::from(b.params.k());
                let s: Vec<f64> = area[..complete].iter().map(|a| a / (k * len)).collect();
                Estimate::from_samples(&s)
            })
            .collect();
        let blocking = self
            .attempts
            .iter()
            .zip(&self.rejections)
            .map(|(att, rej)| {
                let total_att: u64 = att[..complete].iter().sum();
                let total_rej: u64 = rej[..complete].iter().sum();
                let frac: Vec<f64> = att[..complete]
                    .iter()
                    .zip(&rej[..complete])
                    .filter(|(a, _)| **a > 0)
                    .map(|(a, r)| *r as f64 / *a as f64)
                    .collect();
                let mut e = Estimate::from_samples(&frac);
                e.mean = if total_att > 0 {
                    total_rej as f64 / total_att as f64
                } else {
                    0.0
                };
                e
            })
            .collect();
        let rate = |counts: &[u64]| {
            let s: Vec<f64> = counts[..complete].iter().map(|c| *c as f64 / len).collect();
            Estimate::from_samples(&s)
        };
        let rejection_rate = self.rejections.iter().map(|r| rate(r)).collect();

        let routing = self.network.routing();
        let ids = routing.ids();
        let mut edge_flow = Vec::new();
        for from in 0..ids.len() {
            for (e, (to, _)) in routing.outgoing(from).iter().enumerate() {
                edge_flow.push(EdgeFlowEstimate {
                    from: ids[from].clone(),
                    to: ids[*to].clone(),
                    rate: rate(&self.traversals[self.edge_index[from][e]]),
                });
            }
        }

        SimResult {
            ids: ids.to_vec(),
            occupancy,
            blocking,
            rejection_rate,
            edge_flow,
            hop_histogram: self.hops,
            accounting: self.accounting,
            replications: 1,
            observed_hours: complete as f64 * len,
        }
    }
}

/// One replication with the configured seed.
pub fn run(network: &Network, config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    Engine::new(network, config, config.seed)?.run()
}

/// `config.replications` independent runs with seeds `seed, seed + 1, ...`,
/// executed in parallel and combined into across-replication intervals.
pub fn replicate(network: &Network, config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    if config.replications == 1 {
        return run(network, config);
    }
    let runs = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| Engine::new(network, config, config.seed.wrapping_add(r))?.run())
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&runs))
}

fn aggregate(runs: &[SimResult]) -> SimResult {
    let first = &runs[0];
    let combine = |pick: &dyn Fn(&SimResult) -> f64| {
        let s: Vec<f64> = runs.iter().map(pick).collect();
        Estimate::from_samples(&s)
    };
    let n = first.ids.len();
    let occupancy = (0..n).map(|i| combine(&|r| r.occupancy[i].mean)).collect();
    let blocking = (0..n).map(|i| combine(&|r| r.blocking[i].mean)).collect();
    let rejection_rate = (0..n)
        .map(|i| combine(&|r| r.rejection_rate[i].mean))
        .collect();
    let edge_flow = first
        .edge_flow
        .iter()
        .enumerate()
        .map(|(e, ef)| EdgeFlowEstimate {
            from: ef.from.clone(),
            to: ef.to.clone(),
            rate: combine(&|r| r.edge_flow[e].rate.mean),
        })
        .collect();
    let mut hop_histogram: Vec<u64> = Vec::new();
    let mut accounting = DriverAccounting::default();
    for r in runs {
        if hop_histogram.len() < r.hop_histogram.len() {
            hop_histogram.resize(r.hop_histogram.len(), 0);
        }
        for (h, c) in r.hop_histogram.iter().enumerate() {
            hop_histogram[h] += c;
        }
        accounting.add(&r.accounting);
    }
    SimResult {
        ids: first.ids.clone(),
        occupancy,
        blocking,
        rejection_rate,
        edge_flow,
        hop_histogram,
        accounting,
        replications: runs.len(),
        observed_hours: first.observed_hours,
    }
}

/// Simulated against analytic occupancy for one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGap {
    pub block: String,
    pub simulated: Estimate,
    pub analytic: f64,
    /// `|simulated - analytic| / analytic`; absent when the analytic value is zero.
    pub relative_gap: Option<f64>,
}

/// Per-block gap between a simulation and an analytic network solution.
pub fn compare_occupancy(sim: &SimResult, flows: &crate::network::NetworkFlows) -> Result<Vec<OccupancyGap>> {
    sim.ids
        .iter()
        .zip(&sim.occupancy)
        .map(|(id, est)| {
            let i = flows.index_of(id).ok_or_else(|| {
                Error::invalid(format!("block {id} is missing from the analytic solution"))
            })?;
            let analytic = flows.occupancy[i];
            Ok(OccupancyGap {
                block: id.clone(),
                simulated: *est,
                analytic,
                relative_gap: (analytic > 0.0).then(|| (est.mean - analytic).abs() / analytic),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss_queue;
    use crate::network::{BlockFace, Edge, StreetGraph};

    fn single(k: u32, mu: f64, lambda: f64) -> Network {
        let g = StreetGraph::new(vec!["a".into()], vec![]);
        let b = BlockFace::new("a", QueueParams::new(k, mu).unwrap()).with_lambda(lambda);
        Network::new(&g, &[b]).unwrap()
    }

    #[test]
    fn isolated_block_matches_erlang() {
        let net = single(1, 1.0, 1.0);
        let cfg = SimConfig {
            horizon: 100_000.0,
            warmup: 100.0,
            seed: 7,
            ..Default::default()
        };
        let r = run(&net, &cfg).unwrap();
        let est = r.occupancy[0];
        assert!(est.deviation(0.5) <= 3.0, "{est:?}");
        let b = loss_queue::erlang_blocking(QueueParams::new(1, 1.0).unwrap(), 1.0).unwrap();
        assert!(r.blocking[0].deviation(b) <= 3.0);
        assert!(r.accounting.balanced());
        assert_eq!(r.accounting.exited, r.accounting.arrivals - r.accounting.parked);
    }

    #[test]
    fn no_demand_gives_zeros() {
        let g = StreetGraph::new(
            vec!["a".into(), "b".into()],
            vec![Edge::new("a", "b"), Edge::new("b", "a")],
        );
        let p = QueueParams::new(2, 1.0).unwrap();
        let blocks = vec![
            BlockFace::new("a", p).with_lambda(0.0),
            BlockFace::new("b", p).with_lambda(0.0),
        ];
        let net = Network::new(&g, &blocks).unwrap();
        let r = run(&net, &SimConfig::default()).unwrap();
        assert_eq!(r.accounting, DriverAccounting::default());
        assert!(r.occupancy.iter().all(|e| e.mean == 0.0 && e.half_width == 0.0));
        assert!(r.edge_flow.iter().all(|e| e.rate.mean == 0.0));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let net = single(3, 1.0, 2.5);
        let cfg = SimConfig {
            horizon: 2_000.0,
            seed: 11,
            ..Default::default()
        };
        assert_eq!(run(&net, &cfg).unwrap(), run(&net, &cfg).unwrap());
        let rep = SimConfig {
            replications: 4,
            ..cfg.clone()
        };
        assert_eq!(replicate(&net, &rep).unwrap(), replicate(&net, &rep).unwrap());
    }

    #[test]
    fn one_replication_equals_run() {
        let net = single(2, 1.0, 1.0);
        let cfg = SimConfig {
            horizon: 1_000.0,
            seed: 3,
            ..Default::default()
        };
        assert_eq!(replicate(&net, &cfg).unwrap(), run(&net, &cfg).unwrap());
    }

    #[test]
    fn hop_cap_and_accounting() {
        let g = StreetGraph::new(
            vec!["a".into(), "b".into()],
            vec![Edge::new("a", "b"), Edge::new("b", "a")],
        );
        let p = QueueParams::new(1, 1.0).unwrap();
        let blocks = vec![
            BlockFace::new("a", p).with_lambda(0.8),
            BlockFace::new("b", p).with_lambda(0.8),
        ];
        let net = Network::new(&g, &blocks).unwrap();
        let cfg = SimConfig {
            horizon: 2_000.0,
            max_hops: Some(2),
            seed: 5,
            ..Default::default()
        };
        let r = run(&net, &cfg).unwrap();
        assert!(r.accounting.hop_capped > 0);
        assert!(r.accounting.balanced());
        assert!(r.hop_histogram.len() <= 3);
    }

    #[test]
    fn overload_trips_watchdog() {
        let g = StreetGraph::new(
            vec!["a".into(), "b".into()],
            vec![Edge::new("a", "b"), Edge::new("b", "a")],
        );
        let p = QueueParams::new(1, 1.0).unwrap();
        let blocks = vec![
            BlockFace::new("a", p).with_lambda(5.0),
            BlockFace::new("b", p).with_lambda(5.0),
        ];
        let net = Network::new(&g, &blocks).unwrap();
        let cfg = SimConfig {
            horizon: 1_000.0,
            watchdog_factor: 10.0,
            ..Default::default()
        };
        match run(&net, &cfg) {
            Err(Error::Overload { partial, bound, .. }) => {
                assert_eq!(bound, 20);
                assert!(partial.accounting.balanced());
            }
            other => panic!("expected overload, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn config_validation() {
        let bad = [
            SimConfig {
                warmup: 10.0,
                horizon: 5.0,
                ..Default::default()
            },
            SimConfig {
                edge_delay: 0.0,
                ..Default::default()
            },
            SimConfig {
                replications: 0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn window_splits_across_batches() {
        let w = Window {
            start: 1.0,
            batch_len: 2.0,
            batches: 3,
        };
        let mut acc = vec![0.0; 3];
        w.integrate(&mut acc, 0.0, 4.0, 2.0);
        assert_eq!(acc, vec![4.0, 2.0, 0.0]);
        w.integrate(&mut acc, 6.5, 9.0, 1.0);
        assert_eq!(acc, vec![4.0, 2.0, 0.5]);
        assert_eq!(w.batch_of(0.5), None);
        assert_eq!(w.batch_of(7.5), None);
        assert_eq!(w.batch_of(3.0), Some(1));
    }
}
