//! Event-driven simulation of the relay chain as a tandem of FIFO
//! single-server queues.
//!
//! Packets appear at uniformly random points of `[0, L]`, join the queue of
//! the nearest node, and are forwarded hop by hop towards the sink. Link `i`
//! transmits one packet at a time at rate `R(d_i)`; there is no propagation
//! delay.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::RateFunction;
use crate::evaluate::TrafficModel;
use crate::solver1d::Placement;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("link {link} has zero capacity at length {distance} m")]
    ZeroRateLink { link: usize, distance: f64 },
    #[error(
        "probe is inconclusive: load {unstable} classified unstable below stable load {stable}"
    )]
    InconclusiveProbe { stable: f64, unstable: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalProcess {
    Poisson,
    /// Evenly spaced generation instants `1/λ` apart.
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PacketSize {
    Fixed,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub placement: Placement,
    pub traffic: TrafficModel,
    pub arrivals: ArrivalProcess,
    pub sizes: PacketSize,
    pub horizon_s: f64,
    pub warmup_s: f64,
    pub seed: u64,
    /// Number of equally spaced queue-length samples after warmup.
    pub samples: usize,
    /// Keep a full per-packet event log (memory grows with the horizon).
    pub record_trace: bool,
}

/// Default horizon, in mean packet inter-generation times.
pub const DEFAULT_HORIZON_PACKETS: f64 = 1e6;
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.1;
pub const DEFAULT_SAMPLES: usize = 2000;

impl SimConfig {
    /// Poisson arrivals, fixed packet size, `10^6` packets, 10% warmup.
    pub fn new(placement: Placement, traffic: TrafficModel) -> Self {
        let horizon_s = if traffic.packet_rate > 0.0 {
            DEFAULT_HORIZON_PACKETS / traffic.packet_rate
        } else {
            1.0
        };
        SimConfig {
            placement,
            traffic,
            arrivals: ArrivalProcess::Poisson,
            sizes: PacketSize::Fixed,
            horizon_s,
            warmup_s: DEFAULT_WARMUP_FRACTION * horizon_s,
            seed: 0,
            samples: DEFAULT_SAMPLES,
            record_trace: false,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.horizon_s.is_finite() && self.warmup_s >= 0.0 && self.horizon_s > self.warmup_s) {
            return Err(SimError::Config(format!(
                "need horizon > warmup >= 0 (got {} / {})",
                self.horizon_s, self.warmup_s
            )));
        }
        if self.samples < 2 {
            return Err(SimError::Config("need at least two samples".into()));
        }
        if (self.traffic.length - self.placement.length()).abs()
            > Placement::LENGTH_TOLERANCE * self.placement.length()
        {
            return Err(SimError::Config(
                "traffic area length differs from the placement length".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    /// Packet joins a node's queue (generated there or relayed in).
    Arrive,
    /// Packet finishes transmission out of a node.
    Depart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    /// 1-based relay index.
    pub node: usize,
    pub packet: u64,
    pub kind: TraceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    /// Time-averaged number of packets held at each relay after warmup.
    pub mean_queue: Vec<f64>,
    /// Packets held at each relay at the horizon.
    pub end_queue: Vec<usize>,
    /// Least-squares slope of each relay's queue length (packets/s).
    pub drift: Vec<f64>,
    /// Slope of the total number of packets in the network.
    pub total_drift: f64,
    /// Mean total occupancy over the first quarter of the post-warmup window.
    pub first_quarter_total: f64,
    pub end_total: usize,
    pub generated: u64,
    pub delivered: u64,
    pub in_system: u64,
    pub packet_rate: f64,
    /// Sample times and total occupancy, for time-series output.
    pub sample_times: Vec<f64>,
    pub sample_totals: Vec<usize>,
    /// Per-relay queue lengths at `sample_times`, outer index relay `k - 1`.
    pub sample_queues: Vec<Vec<f64>>,
    pub trace: Option<Vec<TraceEvent>>,
}

/// Drift threshold, as a fraction of the packet generation rate.
pub const DRIFT_THRESHOLD: f64 = 0.01;
/// Growth allowance of the final occupancy over its early average.
pub const END_GROWTH_FACTOR: f64 = 100.0;

impl QueueStats {
    /// Finite-horizon stability verdict: total drift below `0.01 λ` and final
    /// occupancy below 100 times its first-quarter average (floored at one
    /// packet).
    pub fn is_stable(&self) -> bool {
        if self.packet_rate == 0.0 {
            return true;
        }
        self.total_drift < DRIFT_THRESHOLD * self.packet_rate
            && (self.end_total as f64) < END_GROWTH_FACTOR * self.first_quarter_total.max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    Generate,
    /// Transmission completes at the relay with this 1-based index.
    Finish(usize),
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
    // min-heap on (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    id: u64,
    bits: f64,
}

struct Sampler {
    times: Vec<f64>,
    next: usize,
    per_node: Vec<Vec<f64>>,
    totals: Vec<usize>,
}

impl Sampler {
    fn new(warmup: f64, horizon: f64, samples: usize, nodes: usize) -> Self {
        let step = (horizon - warmup) / (samples - 1) as f64;
        Sampler {
            times: (0..samples).map(|k| warmup + step * k as f64).collect(),
            next: 0,
            per_node: vec![Vec::with_capacity(samples); nodes],
            totals: Vec::with_capacity(samples),
        }
    }

    /// Records the (piecewise constant) state for every sample time before `t`.
    fn advance(&mut self, t: f64, queues: &[VecDeque<Packet>]) {
        while self.next < self.times.len() && self.times[self.next] < t {
            let mut total = 0;
            for (series, q) in self.per_node.iter_mut().zip(queues) {
                series.push(q.len() as f64);
                total += q.len();
            }
            self.totals.push(total);
            self.next += 1;
        }
    }
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Runs one simulation. Deterministic for a fixed config.
pub fn simulate(cfg: &SimConfig, rate: &RateFunction) -> Result<QueueStats, SimError> {
    cfg.validate()?;
    let distances = cfg.placement.distances();
    let n = distances.len();
    let positions = cfg.placement.positions();
    let length = cfg.placement.length();

    let link_rate: Vec<f64> = distances.iter().map(|&d| rate.eval(d)).collect();
    if let Some(i) = link_rate.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(SimError::ZeroRateLink {
            link: i + 1,
            distance: distances[i],
        });
    }
    // cell boundaries a_1..a_N: node k owns [a_k, a_{k+1})
    let boundaries: Vec<f64> = positions.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();

    let lambda = cfg.traffic.packet_rate;
    let mean_bits = cfg.traffic.mean_packet_bits;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let interarrival = (lambda > 0.0).then(|| Exp::new(lambda).expect("positive rate"));
    let size_dist = Exp::new(1.0 / mean_bits).expect("positive size");

    // queues[k - 1] holds relay k; the head of the queue is in service
    let mut queues: Vec<VecDeque<Packet>> = vec![VecDeque::new(); n];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |heap: &mut BinaryHeap<Event>, time: f64, kind: EventKind| {
        heap.push(Event { time, seq, kind });
        seq += 1;
    };

    let horizon = cfg.horizon_s;
    let warmup = cfg.warmup_s;
    let mut sampler = Sampler::new(warmup, horizon, cfg.samples, n);
    let mut area = vec![0.0; n];
    let mut last_change = vec![warmup; n];
    let mut trace = cfg.record_trace.then(Vec::new);

    let mut generated = 0u64;
    let mut delivered = 0u64;
    let mut in_system = 0u64;

    let next_gap = |rng: &mut ChaCha8Rng| match (cfg.arrivals, &interarrival) {
        (_, None) => f64::INFINITY,
        (ArrivalProcess::Poisson, Some(exp)) => exp.sample(rng),
        (ArrivalProcess::Deterministic, Some(_)) => 1.0 / lambda,
    };
    let first = next_gap(&mut rng);
    if first <= horizon {
        push(&mut heap, first, EventKind::Generate);
    }

    // time-weighted occupancy after warmup
    let touch = |area: &mut [f64], last: &mut [f64], k: usize, t: f64, len: usize| {
        if t > warmup {
            let from = last[k].max(warmup);
            area[k] += len as f64 * (t - from);
            last[k] = t;
        }
    };

    while let Some(ev) = heap.pop() {
        if ev.time > horizon {
            break;
        }
        let t = ev.time;
        sampler.advance(t, &queues);
        match ev.kind {
            EventKind::Generate => {
                let next = t + next_gap(&mut rng);
                if next <= horizon {
                    push(&mut heap, next, EventKind::Generate);
                }
                let u: f64 = rng.random::<f64>() * length;
                let bits = match cfg.sizes {
                    PacketSize::Fixed => mean_bits,
                    PacketSize::Exponential => size_dist.sample(&mut rng),
                };
                let id = generated;
                generated += 1;
                // owner: number of cell boundaries at or below u
                let owner = boundaries.partition_point(|&a| a <= u);
                if owner == 0 {
                    delivered += 1;
                } else {
                    in_system += 1;
                    let k = owner - 1;
                    touch(&mut area, &mut last_change, k, t, queues[k].len());
                    queues[k].push_back(Packet { id, bits });
                    if let Some(tr) = trace.as_mut() {
                        tr.push(TraceEvent {
                            time: t,
                            node: owner,
                            packet: id,
                            kind: TraceKind::Arrive,
                        });
                    }
                    if queues[k].len() == 1 {
                        push(&mut heap, t + bits / link_rate[k], EventKind::Finish(owner));
                    }
                }
            }
            EventKind::Finish(node) => {
                let k = node - 1;
                touch(&mut area, &mut last_change, k, t, queues[k].len());
                let pkt = queues[k].pop_front().expect("busy server has a packet");
                if let Some(tr) = trace.as_mut() {
                    tr.push(TraceEvent {
                        time: t,
                        node,
                        packet: pkt.id,
                        kind: TraceKind::Depart,
                    });
                }
                if let Some(head) = queues[k].front() {
                    push(
                        &mut heap,
                        t + head.bits / link_rate[k],
                        EventKind::Finish(node),
                    );
                }
                if node == 1 {
                    delivered += 1;
                    in_system -= 1;
                } else {
                    let j = k - 1;
                    touch(&mut area, &mut last_change, j, t, queues[j].len());
                    queues[j].push_back(pkt);
                    if let Some(tr) = trace.as_mut() {
                        tr.push(TraceEvent {
                            time: t,
                            node: node - 1,
                            packet: pkt.id,
                            kind: TraceKind::Arrive,
                        });
                    }
                    if queues[j].len() == 1 {
                        push(
                            &mut heap,
                            t + pkt.bits / link_rate[j],
                            EventKind::Finish(node - 1),
                        );
                    }
                }
            }
        }
        debug_assert_eq!(generated, delivered + in_system);
    }
    sampler.advance(f64::INFINITY, &queues);
    for (k, q) in queues.iter().enumerate() {
        touch(&mut area, &mut last_change, k, horizon, q.len());
    }

    let window = horizon - warmup;
    let mean_queue = area.iter().map(|a| a / window).collect();
    let drift = sampler
        .per_node
        .iter()
        .map(|ys| ls_slope(&sampler.times, ys))
        .collect();
    let totals_f: Vec<f64> = sampler.totals.iter().map(|&v| v as f64).collect();
    let total_drift = ls_slope(&sampler.times, &totals_f);
    let quarter = (totals_f.len() / 4).max(1);
    let first_quarter_total = totals_f[..quarter].iter().sum::<f64>() / quarter as f64;
    let end_queue: Vec<usize> = queues.iter().map(VecDeque::len).collect();

    Ok(QueueStats {
        mean_queue,
        end_total: end_queue.iter().sum(),
        end_queue,
        drift,
        total_drift,
        first_quarter_total,
        generated,
        delivered,
        in_system,
        packet_rate: lambda,
        sample_times: sampler.times,
        sample_totals: sampler.totals,
        sample_queues: sampler.per_node,
        trace,
    })
}

/// Settings shared by every grid point of a stability probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub mean_packet_bits: f64,
    pub arrivals: ArrivalProcess,
    pub sizes: PacketSize,
    pub horizon_packets: f64,
    pub warmup_fraction: f64,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            mean_packet_bits: 1e6,
            arrivals: ArrivalProcess::Poisson,
            sizes: PacketSize::Fixed,
            horizon_packets: DEFAULT_HORIZON_PACKETS,
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub q: f64,
    pub stable: bool,
    pub total_drift: f64,
    pub packet_rate: f64,
    pub end_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub points: Vec<ProbePoint>,
    pub largest_stable: Option<f64>,
    pub smallest_unstable: Option<f64>,
}

impl ProbeResult {
    /// Whether `q` lies between the last stable and first unstable grid load.
    pub fn brackets(&self, q: f64) -> bool {
        match (self.largest_stable, self.smallest_unstable) {
            (Some(lo), Some(hi)) => lo <= q && q <= hi,
            _ => false,
        }
    }
}

/// Simulates each load of an ascending grid and locates the empirical
/// stability threshold. Grid points run in parallel with seeds offset by
/// their index.
pub fn stability_probe(
    placement: &Placement,
    rate: &RateFunction,
    q_grid: &[f64],
    opts: &ProbeOptions,
) -> Result<ProbeResult, SimError> {
    if q_grid.is_empty() {
        return Err(SimError::Config("empty load grid".into()));
    }
    if q_grid.windows(2).any(|w| !(w[0] < w[1])) || !(q_grid[0] > 0.0) {
        return Err(SimError::Config(
            "load grid must be positive and strictly ascending".into(),
        ));
    }
    let length = placement.length();
    let points = q_grid
        .par_iter()
        .enumerate()
        .map(|(idx, &q)| {
            let traffic = TrafficModel::from_load(q, opts.mean_packet_bits, length)
                .map_err(|e| SimError::Config(e.to_string()))?;
            let horizon_s = opts.horizon_packets / traffic.packet_rate;
            let cfg = SimConfig {
                arrivals: opts.arrivals,
                sizes: opts.sizes,
                horizon_s,
                warmup_s: opts.warmup_fraction * horizon_s,
                seed: opts.seed.wrapping_add(idx as u64),
                ..SimConfig::new(placement.clone(), traffic)
            };
            let stats = simulate(&cfg, rate)?;
            Ok(ProbePoint {
                q,
                stable: stats.is_stable(),
                total_drift: stats.total_drift,
                packet_rate: stats.packet_rate,
                end_total: stats.end_total,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    let largest_stable = points.iter().rev().find(|p| p.stable).map(|p| p.q);
    let smallest_unstable = points.iter().find(|p| !p.stable).map(|p| p.q);
    if let (Some(s), Some(u)) = (largest_stable, smallest_unstable) {
        if u < s {
            return Err(SimError::InconclusiveProbe {
                stable: s,
                unstable: u,
            });
        }
    }
    Ok(ProbeResult {
        points,
        largest_stable,
        smallest_unstable,
    })
}
