//! Scaling decision makers consulted by the simulator at every arrival and
//! departure: the solved SMDP policy used as a lookup table, the
//! threshold-on-load monitoring heuristic and the random baseline.

use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Action, Event, EventMode, StateSpace, SystemState};
use crate::solver::{Policy, PolicyFile};

/// What a scaler sees when an event fires.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionContext {
    pub event: Event,
    /// Waiting requests of the event's class.
    pub queue_len: u32,
    pub total_queue_empty: bool,
    /// Some node can host one more replica of the event's class.
    pub capacity_available: bool,
    pub load: f64,
    pub clock: f64,
}

pub trait Scaler {
    fn name(&self) -> &str;

    /// Chooses an action for the event in `ctx`. `snapshot` is the live
    /// cluster viewed as an SMDP state.
    fn decide(&mut self, ctx: &DecisionContext, snapshot: &SystemState) -> Result<Action>;

    fn threshold(&self) -> Option<f64> {
        None
    }
}

/// Sliding-window arrival counter per class.
#[derive(Debug, Clone)]
pub struct LoadEstimator {
    window: f64,
    service_rate: Vec<f64>,
    arrivals: Vec<VecDeque<f64>>,
}

impl LoadEstimator {
    pub fn new(window: f64, service_rate: Vec<f64>) -> Result<Self> {
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::InvalidConfig(format!("load window must be positive, got {window}")));
        }
        let arrivals = vec![VecDeque::new(); service_rate.len()];
        Ok(Self {
            window,
            service_rate,
            arrivals,
        })
    }

    /// Window spanning 50 mean inter-arrival times of the slowest class.
    pub fn default_window(arrival_rate: &[f64]) -> f64 {
        50.0 / arrival_rate.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn record_arrival(&mut self, class: usize, at: f64) {
        self.arrivals[class].push_back(at);
    }

    /// `(arrivals in window / window) / (mu_k * max(replicas, 1))`.
    pub fn estimate(&mut self, class: usize, now: f64, replicas: u32) -> f64 {
        let q = &mut self.arrivals[class];
        while q.front().is_some_and(|&t| t <= now - self.window) {
            q.pop_front();
        }
        let rate = q.len() as f64 / self.window;
        rate / (self.service_rate[class] * replicas.max(1) as f64)
    }
}

/// Algorithm-2 style decision: scale up on an arrival when the load exceeds
/// the threshold and a replica fits; scale down on a departure that leaves
/// the class queue empty.
pub fn monitoring_decide(ctx: &DecisionContext, threshold: f64) -> Action {
    match ctx.event {
        Event::Arrival { .. } if ctx.capacity_available && ctx.load > threshold => Action::ScaleUp,
        Event::Arrival { .. } => Action::Hold,
        Event::Departure { .. } => departure_rule(ctx),
    }
}

pub fn random_decide(ctx: &DecisionContext, rng: &mut impl Rng) -> Action {
    match ctx.event {
        Event::Arrival { .. } if ctx.capacity_available && rng.random_bool(0.5) => Action::ScaleUp,
        Event::Arrival { .. } => Action::Hold,
        Event::Departure { .. } => departure_rule(ctx),
    }
}

fn departure_rule(ctx: &DecisionContext) -> Action {
    if ctx.queue_len == 0 {
        Action::ScaleDown
    } else {
        Action::Hold
    }
}

/// A solved policy indexed by state for O(1) lookups.
#[derive(Debug, Clone)]
pub struct PolicyTable {
    max_replicas: u32,
    max_queue: u32,
    event_mode: EventMode,
    actions: HashMap<SystemState, Action>,
}

impl PolicyTable {
    pub fn from_policy(space: &StateSpace, policy: &Policy) -> Self {
        let cfg = space.config();
        Self {
            max_replicas: cfg.max_replicas,
            max_queue: cfg.max_queue,
            event_mode: cfg.event_mode,
            actions: space.states().iter().cloned().zip(policy.actions.iter().copied()).collect(),
        }
    }

    pub fn from_file(file: &PolicyFile) -> Self {
        Self {
            max_replicas: file.header.max_replicas,
            max_queue: file.header.max_queue,
            event_mode: file.header.event_mode,
            actions: file.rows.iter().map(|r| (r.state.clone(), r.action)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Projects a live state onto the enumeration bounds.
    pub fn clamp(&self, s: &SystemState) -> SystemState {
        let event = match (s.event, self.event_mode) {
            (Event::Departure { class, .. }, EventMode::Aggregated) => Event::Departure { class, node: None },
            (e, _) => e,
        };
        SystemState::new(
            s.replicas.iter().map(|&d| d.min(self.max_replicas)).collect(),
            s.queue.iter().map(|&q| q.min(self.max_queue)).collect(),
            event,
        )
    }

    pub fn lookup(&self, s: &SystemState) -> Result<Action> {
        let key = self.clamp(s);
        self.actions
            .get(&key)
            .copied()
            .ok_or_else(|| Error::ContractViolation(format!("policy has no entry for {key}")))
    }
}

/// Policy lookup with a live feasibility check: a ScaleUp that no node can
/// host becomes Hold.
pub fn smdp_decide(ctx: &DecisionContext, snapshot: &SystemState, table: &PolicyTable) -> Result<Action> {
    match table.lookup(snapshot)? {
        Action::ScaleUp if !ctx.capacity_available => Ok(Action::Hold),
        a => Ok(a),
    }
}

#[derive(Debug, Clone)]
pub struct SmdpScaler {
    table: PolicyTable,
}

impl SmdpScaler {
    pub fn new(table: PolicyTable) -> Self {
        Self { table }
    }
}

impl Scaler for SmdpScaler {
    fn name(&self) -> &str {
        "smdp"
    }

    fn decide(&mut self, ctx: &DecisionContext, snapshot: &SystemState) -> Result<Action> {
        smdp_decide(ctx, snapshot, &self.table)
    }
}

#[derive(Debug, Clone)]
pub struct MonitoringScaler {
    threshold: f64,
}

impl MonitoringScaler {
    pub fn new(threshold: f64) -> Self {
        Self { threshold }
    }
}

impl Scaler for MonitoringScaler {
    fn name(&self) -> &str {
        "mnt"
    }

    fn decide(&mut self, ctx: &DecisionContext, _: &SystemState) -> Result<Action> {
        Ok(monitoring_decide(ctx, self.threshold))
    }

    fn threshold(&self) -> Option<f64> {
        Some(self.threshold)
    }
}

#[derive(Debug, Clone)]
pub struct RandomScaler {
    rng: ChaCha8Rng,
}

impl RandomScaler {
    /// Uses its own stream of `seed`, disjoint from the simulator's.
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        Self { rng }
    }
}

impl Scaler for RandomScaler {
    fn name(&self) -> &str {
        "rf"
    }

    fn decide(&mut self, ctx: &DecisionContext, _: &SystemState) -> Result<Action> {
        Ok(random_decide(ctx, &mut self.rng))
    }
}

/// Keeps each class at a fixed replica count: scales up on arrivals below
/// the target and down on departures above it.
#[derive(Debug, Clone)]
pub struct PinnedScaler {
    target: Vec<u32>,
}

impl PinnedScaler {
    pub fn new(target: Vec<u32>) -> Self {
        Self { target }
    }
}

impl Scaler for PinnedScaler {
    fn name(&self) -> &str {
        "pinned"
    }

    fn decide(&mut self, ctx: &DecisionContext, snapshot: &SystemState) -> Result<Action> {
        let k = ctx.event.class();
        let have = snapshot.replicas[k];
        Ok(match ctx.event {
            Event::Arrival { .. } if have < self.target[k] && ctx.capacity_available => Action::ScaleUp,
            Event::Departure { .. } if have > self.target[k] => Action::ScaleDown,
            _ => Action::Hold,
        })
    }
}
