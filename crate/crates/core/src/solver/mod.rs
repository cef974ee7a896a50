//! Uniformization of the scaling SMDP and the value-iteration solver.
//!
//! After uniformization with the constant
//! `rho = sum_k lambda_k + sum_n sum_k C_n mu_k` the discounted SMDP becomes a
//! discrete-time MDP with discount `rho / (rho + alpha)`, rewards
//! `r(s,a) (gamma(s,a) + alpha) / (rho + alpha)` and self-loop padded
//! transition rows. Value iteration on that MDP starts from zero and stops
//! once successive value tables are within `epsilon` in sup-norm.

mod policy_io;
mod stationary;

use rayon::prelude::*;

pub use policy_io::{read_policy, write_policy, PolicyFile, PolicyHeader, PolicyRow};
pub use stationary::{
    expected_metrics, stationary_distribution, stationary_from_rows, ExpectedMetrics, StationaryDistribution,
};

use crate::error::{Error, Result};
use crate::model::{
    feasible_unchecked, rate_unchecked, reward_unchecked, transitions_unchecked, Action, ScalingConfig, StateSpace,
};

/// Default cap on value-iteration sweeps.
pub const DEFAULT_MAX_SWEEPS: usize = 100_000;
/// Relative gap below which two action values count as tied.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-9;

/// Uniformization constant `sum_k lambda_k + sum_n sum_k C_n mu_k`.
pub fn uniformization_rate(cfg: &ScalingConfig) -> f64 {
    let mu: f64 = cfg.service_rate.iter().sum();
    cfg.total_arrival_rate() + cfg.total_capacity() as f64 * mu
}

/// One feasible action of one state in the uniformized model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionRow {
    pub action: Action,
    /// Event rate of the original SMDP at this pair.
    pub gamma: f64,
    /// Uniformized reward.
    pub rbar: f64,
    start: u32,
    end: u32,
}

#[derive(Debug, Clone)]
pub struct UniformizedModel {
    pub rho: f64,
    pub lambda_bar: f64,
    pub alpha: f64,
    /// Range of `rows` belonging to each state.
    offsets: Vec<u32>,
    rows: Vec<ActionRow>,
    /// `(successor index, probability)` entries, sliced by the rows.
    entries: Vec<(u32, f64)>,
}

impl UniformizedModel {
    pub fn n_states(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Feasible action rows of state `s`, in tie-break order.
    pub fn rows(&self, s: usize) -> &[ActionRow] {
        &self.rows[self.offsets[s] as usize..self.offsets[s + 1] as usize]
    }

    pub fn row(&self, s: usize, a: Action) -> Option<&ActionRow> {
        self.rows(s).iter().find(|r| r.action == a)
    }

    pub fn successors(&self, row: &ActionRow) -> &[(u32, f64)] {
        &self.entries[row.start as usize..row.end as usize]
    }

    pub fn rbar(&self, s: usize, a: Action) -> Option<f64> {
        self.row(s, a).map(|r| r.rbar)
    }

    /// Uniformized probability of moving from `s` to `next` under `a`.
    pub fn pbar(&self, s: usize, a: Action, next: usize) -> Option<f64> {
        let row = self.row(s, a)?;
        Some(
            self.successors(row)
                .iter()
                .filter(|&&(j, _)| j as usize == next)
                .map(|&(_, p)| p)
                .sum(),
        )
    }

    /// A copy of the model with every reward replaced.
    pub fn map_rewards(&self, mut f: impl FnMut(usize, &ActionRow) -> f64) -> Self {
        let mut out = self.clone();
        for s in 0..out.n_states() {
            for i in out.offsets[s] as usize..out.offsets[s + 1] as usize {
                out.rows[i].rbar = f(s, &self.rows[i]);
            }
        }
        out
    }

    /// A copy keeping only the action rows `keep` accepts; every state must
    /// retain at least one.
    pub fn restrict_actions(&self, mut keep: impl FnMut(usize, &ActionRow) -> bool) -> Result<Self> {
        let mut offsets = vec![0u32];
        let mut rows = Vec::with_capacity(self.rows.len());
        for s in 0..self.n_states() {
            rows.extend(self.rows(s).iter().filter(|r| keep(s, r)).copied());
            if rows.len() as u32 == *offsets.last().expect("non-empty") {
                return Err(Error::ContractViolation(format!("state {s} lost every action")));
            }
            offsets.push(rows.len() as u32);
        }
        Ok(Self {
            offsets,
            rows,
            ..self.clone()
        })
    }

    /// Successor rows of the chain induced by a deterministic policy.
    pub fn policy_rows(&self, actions: &[Action]) -> Result<Vec<Vec<(u32, f64)>>> {
        (0..self.n_states())
            .map(|s| {
                let row = self.row(s, actions[s]).ok_or_else(|| {
                    Error::ContractViolation(format!("action {} infeasible in state {s}", actions[s]))
                })?;
                Ok(self.successors(row).to_vec())
            })
            .collect()
    }
}

/// Builds the uniformized model over an enumerated state space.
pub fn uniformize(space: &StateSpace) -> Result<UniformizedModel> {
    let cfg = space.config();
    let rho = uniformization_rate(cfg);
    let alpha = cfg.discount;
    let mut offsets = Vec::with_capacity(space.len() + 1);
    let mut rows = Vec::with_capacity(space.len() * 2);
    let mut entries = Vec::with_capacity(space.len() * (2 * cfg.n_classes + 1));
    offsets.push(0u32);

    for (i, s) in space.states().iter().enumerate() {
        for a in feasible_unchecked(s, cfg) {
            let gamma = rate_unchecked(s, a, cfg);
            // tolerate rounding in the rate sums
            if gamma > rho * (1.0 + 1e-12) {
                return Err(Error::Internal(format!(
                    "event rate {gamma} at state {s} action {a} exceeds the uniformization rate {rho}"
                )));
            }
            let scale = gamma / rho;
            let start = entries.len() as u32;
            let mut stay = 0.0;
            for t in transitions_unchecked(s, a, cfg) {
                let j = space.index_of(&t.next).ok_or_else(|| {
                    Error::Internal(format!("successor {} of {s} is outside the state space", t.next))
                })?;
                if j == i {
                    stay += t.prob;
                } else {
                    entries.push((j as u32, t.prob * scale));
                }
            }
            let self_loop = (1.0 - (1.0 - stay) * scale).max(0.0);
            if self_loop > 0.0 {
                entries.push((i as u32, self_loop));
            }
            let rbar = reward_unchecked(s, a, cfg) * (gamma + alpha) / (rho + alpha);
            rows.push(ActionRow {
                action: a,
                gamma,
                rbar,
                start,
                end: entries.len() as u32,
            });
        }
        offsets.push(rows.len() as u32);
    }

    Ok(UniformizedModel {
        rho,
        lambda_bar: rho / (rho + alpha),
        alpha,
        offsets,
        rows,
        entries,
    })
}

/// Solved scaling policy: one action and value per enumerated state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub actions: Vec<Action>,
    pub values: Vec<f64>,
    /// Sup-norm change of the value table after each sweep.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
}

impl Policy {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }

    #[inline]
    pub fn action(&self, state: usize) -> Action {
        self.actions[state]
    }
}

#[derive(Debug, Clone)]
pub struct ValueIteration {
    pub epsilon: f64,
    pub max_sweeps: usize,
    /// Order in which actions are scored; the first of equally good actions wins.
    pub evaluation_order: [Action; 3],
    /// Actions within `tie_tolerance * max(1, |best|)` of the best value are
    /// tied at policy extraction. Gaps that small are below what the
    /// stopping rule resolves, so they are settled by the preference order.
    pub tie_tolerance: f64,
    /// Split each sweep across the rayon pool above this many states.
    pub parallel_threshold: usize,
}

impl ValueIteration {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            evaluation_order: Action::PREFERENCE,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
            parallel_threshold: 20_000,
        }
    }

    pub fn with_max_sweeps(mut self, n: usize) -> Self {
        self.max_sweeps = n;
        self
    }

    pub fn solve(&self, model: &UniformizedModel) -> Result<Policy> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        let n = model.n_states();
        let mut values = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut residual_history = Vec::new();

        loop {
            let sweep = |(s, out): (usize, &mut f64)| {
                *out = best_value(model, s, &values);
            };
            if n >= self.parallel_threshold {
                next.par_iter_mut().enumerate().for_each(sweep);
            } else {
                next.iter_mut().enumerate().for_each(sweep);
            }
            let residual = values
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            residual_history.push(residual);
            std::mem::swap(&mut values, &mut next);
            if residual <= self.epsilon {
                break;
            }
            if residual_history.len() >= self.max_sweeps {
                return Err(Error::NonConvergence {
                    iterations: residual_history.len(),
                    residual,
                });
            }
        }

        let actions = (0..n).map(|s| self.choose(model, s, &values)).collect();
        Ok(Policy {
            actions,
            values,
            iterations: residual_history.len(),
            residual_history,
        })
    }

    /// Greedy action against `values`, ties settled by the evaluation order.
    fn choose(&self, model: &UniformizedModel, s: usize, values: &[f64]) -> Action {
        let rows = model.rows(s);
        let scored: Vec<(Action, f64)> = self
            .evaluation_order
            .iter()
            .filter_map(|&a| rows.iter().find(|r| r.action == a).map(|r| (a, bellman(model, r, values))))
            .collect();
        let top = scored.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        let slack = self.tie_tolerance * top.abs().max(1.0);
        scored
            .iter()
            .find(|x| x.1 >= top - slack)
            .expect("every state has at least one action")
            .0
    }
}

fn best_value(model: &UniformizedModel, s: usize, values: &[f64]) -> f64 {
    model
        .rows(s)
        .iter()
        .map(|r| bellman(model, r, values))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[inline]
fn bellman(model: &UniformizedModel, row: &ActionRow, values: &[f64]) -> f64 {
    let expected: f64 = model
        .successors(row)
        .iter()
        .map(|&(j, p)| p * values[j as usize])
        .sum();
    row.rbar + model.lambda_bar * expected
}

/// Greedy policy (canonical tie-break) with respect to a value table.
pub fn greedy_policy(model: &UniformizedModel, values: &[f64]) -> Vec<Action> {
    let vi = ValueIteration::new(1.0);
    (0..model.n_states()).map(|s| vi.choose(model, s, values)).collect()
}

/// Enumerates, uniformizes and solves `cfg` with its own epsilon.
pub fn solve(cfg: &ScalingConfig) -> Result<(StateSpace, UniformizedModel, Policy)> {
    cfg.validate()?;
    let space = StateSpace::enumerate(cfg)?;
    let model = uniformize(&space)?;
    let policy = ValueIteration::new(cfg.epsilon).solve(&model)?;
    Ok((space, model, policy))
}

/// Closed-form complexity figures of the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityBounds {
    /// `|S| / (1 - gamma) * ln(1 / (1 - gamma))`.
    pub time: f64,
    /// `|S|`, with `|S| = M^K * Q_m^K * K * (N + 1)`.
    pub space: f64,
}

/// Evaluates the printed time and space bounds for a discount `gamma` in (0, 1).
pub fn complexity_bounds(cfg: &ScalingConfig, gamma: f64) -> Result<ComplexityBounds> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidConfig(format!("discount {gamma} must lie in (0, 1)")));
    }
    let states = crate::model::paper_state_count(cfg.max_replicas, cfg.max_queue, cfg.n_classes, cfg.n_nodes)?;
    let space = states as f64;
    let time = space / (1.0 - gamma) * (1.0 / (1.0 - gamma)).ln();
    if !time.is_finite() {
        return Err(Error::Overflow("time complexity bound"));
    }
    Ok(ComplexityBounds { time, space })
}
