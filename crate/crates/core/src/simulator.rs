//! Discrete-event simulation of an edge cluster running function replicas.
//!
//! Requests of class k arrive as a Poisson stream, wait in a FIFO queue of
//! their class and are served by one replica each for an exponential time.
//! Every arrival and every departure is a decision epoch for the scaler.
//! Replicas occupy `b_k` CPU units on the node the allocator picks, and the
//! per-node capacity is enforced (the SMDP only sees the aggregate).
//!
//! Randomness is split into independent streams of one seed: one arrival
//! stream and one service stream per class, plus one for the allocator, so
//! runs that differ only in allocator or scaler see the same workload.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, Event, ScalingConfig, SystemState};
use crate::scalers::{DecisionContext, LoadEstimator, Scaler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub enum Allocator {
    #[default]
    #[serde(rename = "ffa")]
    FirstFit,
    #[serde(rename = "rfa")]
    RandomFit,
}

impl fmt::Display for Allocator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Allocator::FirstFit => "ffa",
            Allocator::RandomFit => "rfa",
        })
    }
}

impl FromStr for Allocator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ffa" | "ff" | "first_fit" | "first-fit" => Ok(Allocator::FirstFit),
            "rfa" | "rf" | "random_fit" | "random-fit" => Ok(Allocator::RandomFit),
            other => Err(format!("unknown allocator `{other}` (expected ffa or rfa)")),
        }
    }
}

/// How the reported replica average is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicaSampling {
    /// Integrated over simulated time.
    #[default]
    TimeWeighted,
    /// Averaged over post-decision snapshots, one per event.
    EventSampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scaling: ScalingConfig,
    /// Total events processed, warmup included.
    pub horizon_events: u64,
    pub warmup_events: u64,
    pub seed: u64,
    pub allocator: Allocator,
    /// Added once to the delay of every request served on node n.
    pub transmission_delay: Vec<f64>,
    pub load_window: f64,
    pub replica_sampling: ReplicaSampling,
    /// Verify cluster invariants after every event.
    pub debug_checks: bool,
}

impl SimConfig {
    pub fn new(scaling: ScalingConfig, horizon_events: u64, seed: u64) -> Self {
        let transmission_delay = (1..=scaling.n_nodes).map(|n| 0.001 * n as f64).collect();
        let load_window = LoadEstimator::default_window(&scaling.arrival_rate);
        Self {
            scaling,
            horizon_events,
            warmup_events: horizon_events / 10,
            seed,
            allocator: Allocator::FirstFit,
            transmission_delay,
            load_window,
            replica_sampling: ReplicaSampling::TimeWeighted,
            debug_checks: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scaling.validate()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.horizon_events == 0 || self.warmup_events >= self.horizon_events {
            return bad(format!(
                "warmup ({}) must be below the horizon ({})",
                self.warmup_events, self.horizon_events
            ));
        }
        if self.transmission_delay.len() != self.scaling.n_nodes {
            return bad(format!(
                "transmission_delay has {} entries for {} nodes",
                self.transmission_delay.len(),
                self.scaling.n_nodes
            ));
        }
        if self.transmission_delay.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return bad("transmission delays must be finite and non-negative".into());
        }
        if !(self.load_window > 0.0 && self.load_window.is_finite()) {
            return bad(format!("load window must be positive, got {}", self.load_window));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub capacity: u32,
    pub used: u32,
    /// Replicas per class, busy and idle.
    pub replicas: Vec<u32>,
    pub idle: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub nodes: Vec<Node>,
    /// Arrival times of waiting requests, per class.
    pub queues: Vec<VecDeque<f64>>,
    cpu_demand: Vec<u32>,
}

impl Cluster {
    pub fn new(cfg: &ScalingConfig) -> Self {
        let k = cfg.n_classes;
        Self {
            nodes: cfg
                .capacity
                .iter()
                .map(|&capacity| Node {
                    capacity,
                    used: 0,
                    replicas: vec![0; k],
                    idle: vec![0; k],
                })
                .collect(),
            queues: vec![VecDeque::new(); k],
            cpu_demand: cfg.cpu_demand.clone(),
        }
    }

    pub fn free(&self, node: usize) -> u32 {
        self.nodes[node].capacity - self.nodes[node].used
    }

    fn fits(&self, node: usize, class: usize) -> bool {
        self.free(node) >= self.cpu_demand[class]
    }

    /// Lowest-indexed node with room for a class-k replica.
    pub fn allocate_first_fit(&self, class: usize) -> Option<usize> {
        (0..self.nodes.len()).find(|&n| self.fits(n, class))
    }

    /// Uniform choice among the nodes with room for a class-k replica.
    pub fn allocate_random_fit(&self, class: usize, rng: &mut impl Rng) -> Option<usize> {
        let candidates: Vec<usize> = (0..self.nodes.len()).filter(|&n| self.fits(n, class)).collect();
        if candidates.is_empty() {
            None
        } else {
            Some(candidates[rng.random_range(0..candidates.len())])
        }
    }

    pub fn capacity_available(&self, class: usize) -> bool {
        self.allocate_first_fit(class).is_some()
    }

    /// Places a busy replica of class k on `node`.
    pub fn add_replica(&mut self, class: usize, node: usize) -> Result<()> {
        if !self.fits(node, class) {
            return Err(Error::ContractViolation(format!(
                "node {} has {} free CPU units, class {} needs {}",
                node + 1,
                self.free(node),
                class + 1,
                self.cpu_demand[class]
            )));
        }
        let n = &mut self.nodes[node];
        n.used += self.cpu_demand[class];
        n.replicas[class] += 1;
        Ok(())
    }

    /// Removes one idle replica of class k from `node`.
    pub fn remove_replica(&mut self, class: usize, node: usize) -> Result<()> {
        let n = &mut self.nodes[node];
        if n.idle[class] == 0 {
            return Err(Error::ContractViolation(format!(
                "no idle replica of class {} on node {}",
                class + 1,
                node + 1
            )));
        }
        n.idle[class] -= 1;
        n.replicas[class] -= 1;
        n.used -= self.cpu_demand[class];
        Ok(())
    }

    pub fn replicas(&self, class: usize) -> u32 {
        self.nodes.iter().map(|n| n.replicas[class]).sum()
    }

    fn idle_node(&self, class: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.idle[class] > 0)
    }

    /// The cluster seen as an SMDP state: replica totals, waiting requests.
    pub fn snapshot_state(&self, event: Event) -> SystemState {
        let k = self.queues.len();
        SystemState::new(
            (0..k).map(|c| self.replicas(c)).collect(),
            self.queues.iter().map(|q| q.len() as u32).collect(),
            event,
        )
    }

    fn check(&self) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            let used: u32 = n.replicas.iter().zip(&self.cpu_demand).map(|(r, b)| r * b).sum();
            if used != n.used || n.used > n.capacity {
                return Err(Error::Internal(format!(
                    "node {} uses {} of {} (replicas account for {used})",
                    i + 1,
                    n.used,
                    n.capacity
                )));
            }
            if n.idle.iter().zip(&n.replicas).any(|(i, r)| i > r) {
                return Err(Error::Internal(format!("node {} has more idle than total replicas", i + 1)));
            }
        }
        for (c, q) in self.queues.iter().enumerate() {
            if !q.is_empty() && self.idle_node(c).is_some() {
                return Err(Error::Internal(format!(
                    "class {} has an idle replica and {} waiting requests",
                    c + 1,
                    q.len()
                )));
            }
        }
        Ok(())
    }
}

/// Counts that must balance at any instant: every arrival is completed,
/// waiting or in service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Conservation {
    pub arrivals: u64,
    pub completions: u64,
    pub queued: u64,
    pub in_service: u64,
}

impl Conservation {
    pub fn balanced(&self) -> bool {
        self.arrivals == self.completions + self.queued + self.in_service
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// Mean of departure - arrival + transmission delay; `None` without completions.
    pub avg_delay: Option<f64>,
    pub avg_delay_per_class: Vec<Option<f64>>,
    pub avg_replicas: f64,
    pub avg_replicas_per_class: Vec<f64>,
    /// Completions after warmup.
    pub completed: u64,
    pub throughput: f64,
    /// Income of measured arrivals minus the integrated holding cost.
    pub total_reward: f64,
    /// Longest class queue observed after warmup.
    pub max_queue: u32,
    pub measured_time: f64,
    /// ScaleUp decisions no node could host, applied as Hold.
    pub allocation_failures: u64,
    /// Whole-run counts at the horizon.
    pub conservation: Conservation,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Arrival { class: usize },
    Departure { class: usize, node: usize, arrived: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // reversed so the max-heap pops the earliest event first
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

struct Accumulators {
    delay_sum: Vec<f64>,
    delay_count: Vec<u64>,
    replica_area: Vec<f64>,
    replica_samples: Vec<f64>,
    samples: u64,
    income: f64,
    cost: f64,
    max_queue: u32,
}

pub struct Simulation<'a> {
    cfg: SimConfig,
    cluster: Cluster,
    events: BinaryHeap<Pending>,
    seq: u64,
    arrival_rng: Vec<ChaCha8Rng>,
    service_rng: Vec<ChaCha8Rng>,
    alloc_rng: ChaCha8Rng,
    estimator: LoadEstimator,
    counts: Conservation,
    allocation_failures: u64,
    last_started: Vec<f64>,
    trace: Option<&'a mut dyn Write>,
}

impl<'a> Simulation<'a> {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.scaling.n_classes;
        let stream = |s: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(s);
            rng
        };
        let arrival_rng = (0..k as u64).map(stream).collect();
        let service_rng = (0..k as u64).map(|c| stream(k as u64 + c)).collect();
        let alloc_rng = stream(2 * k as u64);
        let estimator = LoadEstimator::new(cfg.load_window, cfg.scaling.service_rate.clone())?;
        Ok(Self {
            cluster: Cluster::new(&cfg.scaling),
            events: BinaryHeap::new(),
            seq: 0,
            arrival_rng,
            service_rng,
            alloc_rng,
            estimator,
            counts: Conservation::default(),
            allocation_failures: 0,
            last_started: vec![f64::NEG_INFINITY; k],
            trace: None,
            cfg,
        })
    }

    /// Writes one line per processed event to `out`.
    pub fn with_trace(mut self, out: &'a mut dyn Write) -> Self {
        self.trace = Some(out);
        self
    }

    fn push(&mut self, time: f64, kind: Kind) {
        self.seq += 1;
        self.events.push(Pending {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn schedule_arrival(&mut self, class: usize, now: f64) {
        let rate = self.cfg.scaling.arrival_rate[class];
        let gap = Exp::new(rate).expect("positive rate").sample(&mut self.arrival_rng[class]);
        self.push(now + gap, Kind::Arrival { class });
    }

    fn start_service(&mut self, class: usize, node: usize, arrived: f64, now: f64) -> Result<()> {
        if self.cfg.debug_checks && arrived < self.last_started[class] {
            return Err(Error::Internal(format!("class {} served out of arrival order", class + 1)));
        }
        self.last_started[class] = arrived;
        let rate = self.cfg.scaling.service_rate[class];
        let service = Exp::new(rate).expect("positive rate").sample(&mut self.service_rng[class]);
        self.counts.in_service += 1;
        self.push(now + service, Kind::Departure { class, node, arrived });
        Ok(())
    }

    fn allocate(&mut self, class: usize) -> Option<usize> {
        match self.cfg.allocator {
            Allocator::FirstFit => self.cluster.allocate_first_fit(class),
            Allocator::RandomFit => self.cluster.allocate_random_fit(class, &mut self.alloc_rng),
        }
    }

    pub fn run(mut self, scaler: &mut dyn Scaler) -> Result<RunMetrics> {
        let k = self.cfg.scaling.n_classes;
        for class in 0..k {
            self.schedule_arrival(class, 0.0);
        }
        let mut acc = Accumulators {
            delay_sum: vec![0.0; k],
            delay_count: vec![0; k],
            replica_area: vec![0.0; k],
            replica_samples: vec![0.0; k],
            samples: 0,
            income: 0.0,
            cost: 0.0,
            max_queue: 0,
        };
        let mut start = 0.0;
        let mut last = 0.0;

        for index in 0..self.cfg.horizon_events {
            let ev = self
                .events
                .pop()
                .ok_or_else(|| Error::Internal("event queue ran dry before the horizon".into()))?;
            let now = ev.time;
            let measuring = index >= self.cfg.warmup_events;
            if index == self.cfg.warmup_events {
                start = now;
                last = now;
            }
            if measuring {
                self.integrate(&mut acc, now - last);
                last = now;
            }

            let (event, action, node) = match ev.kind {
                Kind::Arrival { class } => {
                    let a = self.on_arrival(class, now, scaler)?;
                    if measuring {
                        acc.income += self.cfg.scaling.income[class];
                    }
                    (Event::Arrival { class }, a, None)
                }
                Kind::Departure { class, node, arrived } => {
                    if measuring {
                        acc.delay_sum[class] += now - arrived + self.cfg.transmission_delay[node];
                        acc.delay_count[class] += 1;
                    }
                    let a = self.on_departure(class, node, now, scaler)?;
                    (Event::Departure { class, node: Some(node) }, a, Some(node))
                }
            };

            if measuring {
                for c in 0..k {
                    acc.replica_samples[c] += self.cluster.replicas(c) as f64;
                    acc.max_queue = acc.max_queue.max(self.cluster.queues[c].len() as u32);
                }
                acc.samples += 1;
            }
            if self.cfg.debug_checks {
                self.cluster.check()?;
                if !self.conservation().balanced() {
                    return Err(Error::Internal(format!("conservation broken: {:?}", self.conservation())));
                }
            }
            if let Some(out) = self.trace.as_mut() {
                let s = self.cluster.snapshot_state(event);
                writeln!(
                    out,
                    "{now:.6} {event} {action} {} replicas={} queue={}",
                    node.map_or("-".to_string(), |n| (n + 1).to_string()),
                    crate::model::join(&s.replicas),
                    crate::model::join(&s.queue)
                )
                .map_err(|e| Error::io("trace", e))?;
            }
        }

        let span = last - start;
        let per_class: Vec<Option<f64>> = acc
            .delay_sum
            .iter()
            .zip(&acc.delay_count)
            .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
            .collect();
        let completed: u64 = acc.delay_count.iter().sum();
        let avg_delay = (completed > 0).then(|| acc.delay_sum.iter().sum::<f64>() / completed as f64);
        let replicas_per_class: Vec<f64> = match self.cfg.replica_sampling {
            ReplicaSampling::TimeWeighted if span > 0.0 => acc.replica_area.iter().map(|a| a / span).collect(),
            ReplicaSampling::TimeWeighted => vec![0.0; k],
            ReplicaSampling::EventSampled => {
                acc.replica_samples.iter().map(|a| a / acc.samples.max(1) as f64).collect()
            }
        };
        Ok(RunMetrics {
            avg_delay,
            avg_delay_per_class: per_class,
            avg_replicas: replicas_per_class.iter().sum(),
            avg_replicas_per_class: replicas_per_class,
            completed,
            throughput: if span > 0.0 { completed as f64 / span } else { 0.0 },
            total_reward: acc.income - acc.cost,
            max_queue: acc.max_queue,
            measured_time: span,
            allocation_failures: self.allocation_failures,
            conservation: self.conservation(),
        })
    }

    fn conservation(&self) -> Conservation {
        Conservation {
            queued: self.cluster.queues.iter().map(|q| q.len() as u64).sum(),
            ..self.counts
        }
    }

    fn integrate(&self, acc: &mut Accumulators, dt: f64) {
        if dt <= 0.0 {
            return;
        }
        let s = &self.cfg.scaling;
        let mut rate = 0.0;
        for c in 0..s.n_classes {
            let r = self.cluster.replicas(c) as f64;
            acc.replica_area[c] += r * dt;
            rate += s.unit_cost * s.cpu_demand[c] as f64 * r;
            rate += self.cluster.queues[c].len() as f64 / s.arrival_rate[c];
        }
        acc.cost += rate * dt;
    }

    fn context(&mut self, event: Event, now: f64) -> DecisionContext {
        let class = event.class();
        let replicas = self.cluster.replicas(class);
        DecisionContext {
            event,
            queue_len: self.cluster.queues[class].len() as u32,
            total_queue_empty: self.cluster.queues.iter().all(|q| q.is_empty()),
            capacity_available: self.cluster.capacity_available(class),
            load: self.estimator.estimate(class, now, replicas),
            clock: now,
        }
    }

    fn decide(&mut self, event: Event, now: f64, scaler: &mut dyn Scaler) -> Result<Action> {
        let ctx = self.context(event, now);
        let snapshot = self.cluster.snapshot_state(event);
        let action = scaler.decide(&ctx, &snapshot)?;
        if !action.allowed_on(&event) {
            return Err(Error::ContractViolation(format!(
                "scaler `{}` chose {action} on {event}",
                scaler.name()
            )));
        }
        Ok(action)
    }

    fn on_arrival(&mut self, class: usize, now: f64, scaler: &mut dyn Scaler) -> Result<Action> {
        self.counts.arrivals += 1;
        self.schedule_arrival(class, now);
        self.estimator.record_arrival(class, now);
        let mut action = self.decide(Event::Arrival { class }, now, scaler)?;
        // the request joins the tail; whoever serves next takes the head
        self.cluster.queues[class].push_back(now);
        if action == Action::ScaleUp {
            match self.allocate(class) {
                Some(node) => {
                    self.cluster.add_replica(class, node)?;
                    let head = self.cluster.queues[class].pop_front().expect("just pushed");
                    return self.start_service(class, node, head, now).map(|_| action);
                }
                None => {
                    self.allocation_failures += 1;
                    action = Action::Hold;
                }
            }
        }
        if let Some(node) = self.cluster.idle_node(class) {
            self.cluster.nodes[node].idle[class] -= 1;
            let head = self.cluster.queues[class].pop_front().expect("just pushed");
            self.start_service(class, node, head, now)?;
        }
        Ok(action)
    }

    fn on_departure(&mut self, class: usize, node: usize, now: f64, scaler: &mut dyn Scaler) -> Result<Action> {
        self.counts.in_service -= 1;
        self.counts.completions += 1;
        let action = self.decide(Event::Departure { class, node: Some(node) }, now, scaler)?;
        // the finishing replica is idle from here on
        self.cluster.nodes[node].idle[class] += 1;
        if action == Action::ScaleDown {
            self.cluster.remove_replica(class, node)?;
        } else if let Some(head) = self.cluster.queues[class].pop_front() {
            self.cluster.nodes[node].idle[class] -= 1;
            self.start_service(class, node, head, now)?;
        }
        Ok(action)
    }
}

/// Runs one simulation to the horizon.
pub fn run(cfg: &SimConfig, scaler: &mut dyn Scaler) -> Result<RunMetrics> {
    Simulation::new(cfg.clone())?.run(scaler)
}
