//! The scaling SMDP: states, feasible actions, event rates, the transition
//! kernel and the discounted rewards.
//!
//! Replica counts are tracked per class only, aggregated over nodes, so the
//! per-node capacity constraint is enforced here in its aggregate form
//! `sum_k b_k * delta_k <= sum_n C_n`. Queues are truncated at `max_queue`.
//! Class and node indices are zero-based in code and one-based in every
//! textual rendering.

mod config;
mod space;

use std::fmt;
use std::str::FromStr;

pub use config::{EventMode, ScalingConfig};
pub use space::{paper_state_count, state_space_size, CountFormula, StateSpace, DEFAULT_STATE_LIMIT};

use crate::error::{Error, Result};

#[cfg(test)]
pub(crate) use crate::presets::tiny as tiny_config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Event {
    Arrival { class: usize },
    Departure { class: usize, node: Option<usize> },
}

impl Event {
    pub fn class(&self) -> usize {
        match *self {
            Event::Arrival { class } | Event::Departure { class, .. } => class,
        }
    }

    pub fn is_arrival(&self) -> bool {
        matches!(self, Event::Arrival { .. })
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Event::Arrival { class } => write!(f, "A{}", class + 1),
            Event::Departure { class, node: None } => write!(f, "D{}", class + 1),
            Event::Departure {
                class,
                node: Some(n),
            } => write!(f, "D{}.{}", class + 1, n + 1),
        }
    }
}

impl FromStr for Event {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let one_based = |t: &str| -> std::result::Result<usize, String> {
            match t.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(format!("bad index `{t}` in event `{s}`")),
            }
        };
        if let Some(rest) = s.strip_prefix('A') {
            Ok(Event::Arrival {
                class: one_based(rest)?,
            })
        } else if let Some(rest) = s.strip_prefix('D') {
            match rest.split_once('.') {
                Some((k, n)) => Ok(Event::Departure {
                    class: one_based(k)?,
                    node: Some(one_based(n)?),
                }),
                None => Ok(Event::Departure {
                    class: one_based(rest)?,
                    node: None,
                }),
            }
        } else {
            Err(format!("unknown event `{s}`"))
        }
    }
}

/// Scaling decision taken at an event. Variant order is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Hold,
    ScaleUp,
    ScaleDown,
}

impl Action {
    /// Every action in tie-break preference order.
    pub const PREFERENCE: [Action; 3] = [Action::Hold, Action::ScaleUp, Action::ScaleDown];

    pub fn delta(self) -> i32 {
        match self {
            Action::Hold => 0,
            Action::ScaleUp => 1,
            Action::ScaleDown => -1,
        }
    }

    /// Whether the action may ever be taken on this kind of event.
    pub fn allowed_on(self, event: &Event) -> bool {
        match self {
            Action::Hold => true,
            Action::ScaleUp => event.is_arrival(),
            Action::ScaleDown => !event.is_arrival(),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Hold => "0",
            Action::ScaleUp => "+1",
            Action::ScaleDown => "-1",
        })
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "0" => Ok(Action::Hold),
            "+1" | "1" => Ok(Action::ScaleUp),
            "-1" => Ok(Action::ScaleDown),
            _ => Err(format!("unknown action `{s}`")),
        }
    }
}

/// `(replicas, queue, event)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SystemState {
    pub replicas: Vec<u32>,
    pub queue: Vec<u32>,
    pub event: Event,
}

impl SystemState {
    pub fn new(replicas: Vec<u32>, queue: Vec<u32>, event: Event) -> Self {
        Self {
            replicas,
            queue,
            event,
        }
    }

    /// The empty system awaiting an arrival of the first class.
    pub fn initial(cfg: &ScalingConfig) -> Self {
        Self::new(
            vec![0; cfg.n_classes],
            vec![0; cfg.n_classes],
            Event::Arrival { class: 0 },
        )
    }

    pub fn validate(&self, cfg: &ScalingConfig) -> Result<()> {
        let k = cfg.n_classes;
        let violation = |msg: String| Err(Error::ContractViolation(format!("state {self}: {msg}")));
        if self.replicas.len() != k || self.queue.len() != k {
            return violation(format!("expected {k} classes"));
        }
        if let Some(&d) = self.replicas.iter().find(|&&d| d > cfg.max_replicas) {
            return violation(format!("replica count {d} above cap {}", cfg.max_replicas));
        }
        if let Some(&q) = self.queue.iter().find(|&&q| q > cfg.max_queue) {
            return violation(format!("queue length {q} above cap {}", cfg.max_queue));
        }
        if cpu_used(&self.replicas, cfg) > cfg.total_capacity() {
            return violation("replicas exceed the aggregate capacity".into());
        }
        let class = self.event.class();
        if class >= k {
            return violation(format!("event class {} out of range", class + 1));
        }
        if let Event::Departure { node, .. } = self.event {
            if self.replicas[class] == 0 {
                return violation("departure without a replica".into());
            }
            match (cfg.event_mode, node) {
                (EventMode::Aggregated, None) => {}
                (EventMode::NodeIndexed, Some(n)) if n < cfg.n_nodes => {}
                _ => return violation("departure node index does not match the event mode".into()),
            }
        }
        Ok(())
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({};{};{})", join(&self.replicas), join(&self.queue), self.event)
    }
}

pub(crate) fn join(xs: &[u32]) -> String {
    xs.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

/// One successor of a state-action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub next: SystemState,
    pub prob: f64,
}

pub(crate) fn cpu_used(replicas: &[u32], cfg: &ScalingConfig) -> u64 {
    replicas
        .iter()
        .zip(&cfg.cpu_demand)
        .map(|(&d, &b)| d as u64 * b as u64)
        .sum()
}

/// Actions available at `s`, in tie-break order. Hold is always present.
pub fn feasible_actions(s: &SystemState, cfg: &ScalingConfig) -> Result<Vec<Action>> {
    s.validate(cfg)?;
    Ok(feasible_unchecked(s, cfg))
}

pub(crate) fn feasible_unchecked(s: &SystemState, cfg: &ScalingConfig) -> Vec<Action> {
    let k = s.event.class();
    let mut actions = vec![Action::Hold];
    match s.event {
        Event::Arrival { .. } => {
            let fits = cpu_used(&s.replicas, cfg) + cfg.cpu_demand[k] as u64 <= cfg.total_capacity();
            if s.replicas[k] < cfg.max_replicas && fits {
                actions.push(Action::ScaleUp);
            }
        }
        Event::Departure { .. } => {
            if s.replicas[k] >= 1 {
                actions.push(Action::ScaleDown);
            }
        }
    }
    actions
}

fn require_feasible(s: &SystemState, a: Action, cfg: &ScalingConfig) -> Result<()> {
    if feasible_actions(s, cfg)?.contains(&a) {
        Ok(())
    } else {
        Err(Error::ContractViolation(format!("action {a} is not feasible in state {s}")))
    }
}

/// Post-action replica and queue vectors.
pub fn apply_action(s: &SystemState, a: Action, cfg: &ScalingConfig) -> Result<(Vec<u32>, Vec<u32>)> {
    require_feasible(s, a, cfg)?;
    Ok(apply_unchecked(s, a, cfg))
}

pub(crate) fn apply_unchecked(s: &SystemState, a: Action, cfg: &ScalingConfig) -> (Vec<u32>, Vec<u32>) {
    let k = s.event.class();
    let mut replicas = s.replicas.clone();
    let mut queue = s.queue.clone();
    match (s.event.is_arrival(), a) {
        (true, Action::Hold) => queue[k] = (queue[k] + 1).min(cfg.max_queue),
        (true, Action::ScaleUp) => replicas[k] += 1,
        (false, Action::Hold) => queue[k] = queue[k].saturating_sub(1),
        (false, Action::ScaleDown) => replicas[k] -= 1,
        _ => unreachable!("action {a} on event {}", s.event),
    }
    (replicas, queue)
}

/// Total rate of the next event, `gamma(s, a)`.
pub fn event_rate(s: &SystemState, a: Action, cfg: &ScalingConfig) -> Result<f64> {
    require_feasible(s, a, cfg)?;
    Ok(rate_unchecked(s, a, cfg))
}

pub(crate) fn rate_unchecked(s: &SystemState, a: Action, cfg: &ScalingConfig) -> f64 {
    let arrivals = cfg.total_arrival_rate();
    let departures: f64 = s
        .replicas
        .iter()
        .zip(&cfg.service_rate)
        .map(|(&d, &mu)| d as f64 * mu)
        .sum();
    let k = s.event.class();
    arrivals + departures + a.delta() as f64 * cfg.service_rate[k]
}

/// Successor distribution of `(s, a)`.
pub fn transitions(s: &SystemState, a: Action, cfg: &ScalingConfig) -> Result<Vec<Transition>> {
    require_feasible(s, a, cfg)?;
    Ok(transitions_unchecked(s, a, cfg))
}

pub(crate) fn transitions_unchecked(s: &SystemState, a: Action, cfg: &ScalingConfig) -> Vec<Transition> {
    let (replicas, queue) = apply_unchecked(s, a, cfg);
    let gamma = rate_unchecked(s, a, cfg);
    let mut out = Vec::with_capacity(2 * cfg.n_classes);
    let next = |event| SystemState::new(replicas.clone(), queue.clone(), event);
    for class in 0..cfg.n_classes {
        out.push(Transition {
            next: next(Event::Arrival { class }),
            prob: cfg.arrival_rate[class] / gamma,
        });
    }
    for (class, &d) in replicas.iter().enumerate() {
        if d == 0 {
            continue;
        }
        let mass = d as f64 * cfg.service_rate[class] / gamma;
        match cfg.event_mode {
            EventMode::Aggregated => out.push(Transition {
                next: next(Event::Departure { class, node: None }),
                prob: mass,
            }),
            EventMode::NodeIndexed => {
                let share = mass / cfg.n_nodes as f64;
                for n in 0..cfg.n_nodes {
                    out.push(Transition {
                        next: next(Event::Departure {
                            class,
                            node: Some(n),
                        }),
                        prob: share,
                    });
                }
            }
        }
    }
    out
}

/// Holding cost rate of a post-action configuration: processing plus the
/// Little's-law queueing term.
pub fn holding_cost(replicas: &[u32], queue: &[u32], cfg: &ScalingConfig) -> f64 {
    let processing: f64 = replicas
        .iter()
        .zip(&cfg.cpu_demand)
        .map(|(&d, &b)| cfg.unit_cost * b as f64 * d as f64)
        .sum();
    let queueing: f64 = queue
        .iter()
        .zip(&cfg.arrival_rate)
        .map(|(&q, &l)| q as f64 / l)
        .sum();
    processing + queueing
}

/// Lump-sum income earned at `(s, a)`.
pub fn income(s: &SystemState, cfg: &ScalingConfig) -> f64 {
    match s.event {
        Event::Arrival { class } => cfg.income[class],
        Event::Departure { .. } => 0.0,
    }
}

/// Discounted reward `w(s,a) - c(s,a) / (alpha + gamma(s,a))`.
pub fn reward(s: &SystemState, a: Action, cfg: &ScalingConfig) -> Result<f64> {
    require_feasible(s, a, cfg)?;
    Ok(reward_unchecked(s, a, cfg))
}

pub(crate) fn reward_unchecked(s: &SystemState, a: Action, cfg: &ScalingConfig) -> f64 {
    let (replicas, queue) = apply_unchecked(s, a, cfg);
    let gamma = rate_unchecked(s, a, cfg);
    income(s, cfg) - holding_cost(&replicas, &queue, cfg) / (cfg.discount + gamma)
}
