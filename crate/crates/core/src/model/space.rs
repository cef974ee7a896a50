use std::collections::HashMap;

use super::{cpu_used, EventMode, Event, ScalingConfig, SystemState};
use crate::error::{Error, Result};

/// Default refusal threshold for enumerating a state space.
pub const DEFAULT_STATE_LIMIT: u128 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountFormula {
    /// `M^K * Q_m^K * K * (N + 1)`, the closed-form count. It ignores the
    /// capacity constraint and counts departure events with no replica.
    PaperFormula,
    /// Number of states `StateSpace::enumerate` produces.
    ExactEnumeration,
}

/// The closed-form count `M^K * Q_m^K * K * (N + 1)`.
pub fn paper_state_count(max_replicas: u32, max_queue: u32, n_classes: usize, n_nodes: usize) -> Result<u128> {
    let overflow = || Error::Overflow("closed-form state count");
    let k = u32::try_from(n_classes).map_err(|_| overflow())?;
    let m = (max_replicas as u128).checked_pow(k).ok_or_else(overflow)?;
    let q = (max_queue as u128).checked_pow(k).ok_or_else(overflow)?;
    m.checked_mul(q)
        .and_then(|x| x.checked_mul(n_classes as u128))
        .and_then(|x| x.checked_mul(n_nodes as u128 + 1))
        .ok_or_else(overflow)
}

pub fn state_space_size(cfg: &ScalingConfig, formula: CountFormula) -> Result<u128> {
    match formula {
        CountFormula::PaperFormula => {
            paper_state_count(cfg.max_replicas, cfg.max_queue, cfg.n_classes, cfg.n_nodes)
        }
        CountFormula::ExactEnumeration => exact_count(cfg),
    }
}

/// Counts the enumerable states without materialising them: a knapsack DP
/// over classes tracks, per CPU total, the number of replica vectors and the
/// summed number of classes with at least one replica (each such class adds
/// departure events).
fn exact_count(cfg: &ScalingConfig) -> Result<u128> {
    cfg.validate()?;
    let overflow = || Error::Overflow("exact state count");
    let cap = cfg.total_capacity() as usize;
    // (vectors, summed non-zero classes) per CPU usage
    let mut table = vec![(0u128, 0u128); cap + 1];
    table[0] = (1, 0);
    for &b in &cfg.cpu_demand {
        let b = b as usize;
        let mut next = vec![(0u128, 0u128); cap + 1];
        for (used, &(count, nonzero)) in table.iter().enumerate() {
            if count == 0 {
                continue;
            }
            for d in 0..=cfg.max_replicas as usize {
                let total = used + d * b;
                if total > cap {
                    break;
                }
                let slot = &mut next[total];
                slot.0 = slot.0.checked_add(count).ok_or_else(overflow)?;
                let extra = if d >= 1 { count } else { 0 };
                slot.1 = slot
                    .1
                    .checked_add(nonzero)
                    .and_then(|x| x.checked_add(extra))
                    .ok_or_else(overflow)?;
            }
        }
        table = next;
    }
    let (vectors, nonzero) = table
        .iter()
        .try_fold((0u128, 0u128), |(v, z), &(c, n)| Some((v.checked_add(c)?, z.checked_add(n)?)))
        .ok_or_else(overflow)?;
    let per_departure = match cfg.event_mode {
        EventMode::Aggregated => 1u128,
        EventMode::NodeIndexed => cfg.n_nodes as u128,
    };
    let queues = (cfg.max_queue as u128 + 1)
        .checked_pow(cfg.n_classes as u32)
        .ok_or_else(overflow)?;
    let events = vectors
        .checked_mul(cfg.n_classes as u128)
        .and_then(|a| nonzero.checked_mul(per_departure)?.checked_add(a))
        .ok_or_else(overflow)?;
    events.checked_mul(queues).ok_or_else(overflow)
}

/// Enumerated, indexed state space of a configuration.
#[derive(Debug, Clone)]
pub struct StateSpace {
    cfg: ScalingConfig,
    states: Vec<SystemState>,
    index: HashMap<u128, u32>,
}

impl StateSpace {
    pub fn enumerate(cfg: &ScalingConfig) -> Result<Self> {
        Self::enumerate_with_limit(cfg, DEFAULT_STATE_LIMIT)
    }

    /// Lists every valid state in lexicographic order of (replicas, queue, event).
    pub fn enumerate_with_limit(cfg: &ScalingConfig, limit: u128) -> Result<Self> {
        let count = exact_count(cfg)?;
        if count > limit {
            return Err(Error::StateSpaceTooLarge { count, limit });
        }
        if count > u32::MAX as u128 {
            return Err(Error::StateSpaceTooLarge {
                count,
                limit: u32::MAX as u128,
            });
        }
        let k = cfg.n_classes;
        let capacity = cfg.total_capacity();
        let replica_vectors: Vec<Vec<u32>> = odometer(k, cfg.max_replicas)
            .filter(|d| cpu_used(d, cfg) <= capacity)
            .collect();
        let queue_vectors: Vec<Vec<u32>> = odometer(k, cfg.max_queue).collect();

        let mut states = Vec::with_capacity(count as usize);
        for d in &replica_vectors {
            let events = events_for(d, cfg);
            for q in &queue_vectors {
                for &e in &events {
                    states.push(SystemState::new(d.clone(), q.clone(), e));
                }
            }
        }
        if states.len() as u128 != count {
            return Err(Error::Internal(format!(
                "enumerated {} states but counted {count}",
                states.len()
            )));
        }
        let mut space = StateSpace {
            cfg: cfg.clone(),
            states,
            index: HashMap::new(),
        };
        let index = space
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| (space.code(s), i as u32))
            .collect();
        space.index = index;
        Ok(space)
    }

    pub fn config(&self) -> &ScalingConfig {
        &self.cfg
    }

    pub fn states(&self) -> &[SystemState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> &SystemState {
        &self.states[i]
    }

    /// Offset of `s` in the enumeration, if `s` is a valid state.
    pub fn index_of(&self, s: &SystemState) -> Option<usize> {
        if s.replicas.len() != self.cfg.n_classes
            || s.queue.len() != self.cfg.n_classes
            || s.replicas.iter().any(|&d| d > self.cfg.max_replicas)
            || s.queue.iter().any(|&q| q > self.cfg.max_queue)
        {
            return None;
        }
        self.index.get(&self.code(s)).map(|&i| i as usize)
    }

    pub fn initial_index(&self) -> usize {
        self.index_of(&SystemState::initial(&self.cfg))
            .expect("empty system is always enumerated")
    }

    /// Mixed-radix code; callers ensure every digit is within its bound.
    fn code(&self, s: &SystemState) -> u128 {
        let cfg = &self.cfg;
        let mut code: u128 = 0;
        for &d in &s.replicas {
            code = code * (cfg.max_replicas as u128 + 1) + d as u128;
        }
        for &q in &s.queue {
            code = code * (cfg.max_queue as u128 + 1) + q as u128;
        }
        let k = cfg.n_classes as u128;
        let nodes = cfg.n_nodes as u128;
        let event = match s.event {
            Event::Arrival { class } => class as u128,
            Event::Departure { class, node } => {
                k + class as u128 * nodes + node.map_or(0, |n| n as u128)
            }
        };
        code * (k + k * nodes) + event
    }
}

fn events_for(replicas: &[u32], cfg: &ScalingConfig) -> Vec<Event> {
    let mut events: Vec<Event> = (0..cfg.n_classes).map(|class| Event::Arrival { class }).collect();
    for (class, &d) in replicas.iter().enumerate() {
        if d == 0 {
            continue;
        }
        match cfg.event_mode {
            EventMode::Aggregated => events.push(Event::Departure { class, node: None }),
            EventMode::NodeIndexed => {
                events.extend((0..cfg.n_nodes).map(|n| Event::Departure { class, node: Some(n) }))
            }
        }
    }
    events
}

/// All vectors in `[0, max]^len`, lexicographically.
fn odometer(len: usize, max: u32) -> impl Iterator<Item = Vec<u32>> {
    let mut next = Some(vec![0u32; len]);
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut succ = current.clone();
        let mut i = len;
        while i > 0 {
            i -= 1;
            if succ[i] < max {
                succ[i] += 1;
                next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(current)
    })
}
