//! Reference computations that do not share code paths with the solver or
//! the simulator: exhaustive policy search with exact policy evaluation,
//! the Erlang-C formulas for M/M/m queues, and Monte-Carlo estimation of
//! discounted values by simulating the continuous-time chain.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    apply_unchecked, feasible_unchecked, holding_cost, income, rate_unchecked, transitions_unchecked, Action,
    StateSpace,
};
use crate::solver::UniformizedModel;

/// Largest state count accepted for exhaustive search.
pub const TINY_STATE_LIMIT: usize = 200;
/// Largest number of deterministic policies accepted for exhaustive search.
pub const TINY_POLICY_LIMIT: u128 = 1_000_000;

/// Number of deterministic stationary policies of a model.
pub fn policy_count(model: &UniformizedModel) -> u128 {
    (0..model.n_states())
        .map(|s| model.rows(s).len() as u128)
        .try_fold(1u128, |acc, n| acc.checked_mul(n))
        .unwrap_or(u128::MAX)
}

/// Exact discounted value of a deterministic policy: solves
/// `(I - lambda_bar P_d) v = r_d` with a dense LU factorisation.
pub fn evaluate_policy(model: &UniformizedModel, actions: &[Action]) -> Result<Vec<f64>> {
    let n = model.n_states();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for s in 0..n {
        let row = model
            .row(s, actions[s])
            .ok_or_else(|| Error::ContractViolation(format!("action {} infeasible in state {s}", actions[s])))?;
        b[s] = row.rbar;
        for &(j, p) in model.successors(row) {
            a[(s, j as usize)] -= model.lambda_bar * p;
        }
    }
    let v = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Internal("policy evaluation system is singular".into()))?;
    Ok(v.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub actions: Vec<Action>,
    pub values: Vec<f64>,
    pub policies_evaluated: u128,
}

/// Evaluates every deterministic stationary policy and returns the
/// pointwise-maximal value table together with a policy achieving it.
pub fn brute_force_optimal(model: &UniformizedModel) -> Result<BruteForceResult> {
    let n = model.n_states();
    if n > TINY_STATE_LIMIT {
        return Err(Error::StateSpaceTooLarge {
            count: n as u128,
            limit: TINY_STATE_LIMIT as u128,
        });
    }
    let count = policy_count(model);
    if count > TINY_POLICY_LIMIT {
        return Err(Error::TooManyPolicies {
            count,
            limit: TINY_POLICY_LIMIT,
        });
    }
    let choices: Vec<Vec<Action>> = (0..n)
        .map(|s| model.rows(s).iter().map(|r| r.action).collect())
        .collect();
    let mut digits = vec![0usize; n];
    let mut best_max = vec![f64::NEG_INFINITY; n];
    let mut best_sum: Option<(f64, Vec<Action>, Vec<f64>)> = None;
    let mut evaluated = 0u128;
    loop {
        let actions: Vec<Action> = digits.iter().zip(&choices).map(|(&d, c)| c[d]).collect();
        let values = evaluate_policy(model, &actions)?;
        evaluated += 1;
        for (m, v) in best_max.iter_mut().zip(&values) {
            *m = m.max(*v);
        }
        let sum: f64 = values.iter().sum();
        if best_sum.as_ref().is_none_or(|(s, _, _)| sum > *s) {
            best_sum = Some((sum, actions, values));
        }
        // advance the mixed-radix counter
        let mut i = 0;
        loop {
            if i == n {
                let (_, actions, values) = best_sum.expect("at least one policy");
                // an optimal policy dominates every state at once, so it also maximises the sum
                for (s, (v, m)) in values.iter().zip(&best_max).enumerate() {
                    if (v - m).abs() > 1e-9 * (1.0 + m.abs()) {
                        return Err(Error::Internal(format!(
                            "no single policy attains the pointwise maximum (state {s}: {v} < {m})"
                        )));
                    }
                }
                return Ok(BruteForceResult {
                    actions,
                    values: best_max,
                    policies_evaluated: evaluated,
                });
            }
            digits[i] += 1;
            if digits[i] < choices[i].len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlangC {
    /// Probability an arrival has to wait.
    pub wait_prob: f64,
    pub mean_wait: f64,
    pub mean_sojourn: f64,
}

/// Erlang-C figures of an M/M/m queue, via the Erlang-B recursion.
pub fn erlang_c_delay(lambda: f64, mu: f64, servers: u32) -> Result<ErlangC> {
    if servers == 0 || !(lambda > 0.0 && mu > 0.0) || lambda >= servers as f64 * mu {
        return Err(Error::UnstableQueue { lambda, mu, servers });
    }
    let offered = lambda / mu;
    let mut blocking = 1.0;
    for j in 1..=servers {
        blocking = offered * blocking / (j as f64 + offered * blocking);
    }
    let m = servers as f64;
    let wait_prob = m * blocking / (m - offered * (1.0 - blocking));
    let mean_wait = wait_prob / (m * mu - lambda);
    Ok(ErlangC {
        wait_prob,
        mean_wait,
        mean_sojourn: mean_wait + 1.0 / mu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
}

/// Per-state data of the policy-induced continuous-time chain.
struct Step {
    income: f64,
    cost_rate: f64,
    rate: f64,
    /// cumulative probabilities with successor indices
    successors: Vec<(f64, usize)>,
}

/// Estimates the discounted value of `actions` from `start` by simulating
/// the SMDP directly: lump-sum income at every decision epoch, holding cost
/// accrued continuously and discounted at rate `alpha` between epochs.
pub fn monte_carlo_value(
    space: &StateSpace,
    actions: &[Action],
    start: usize,
    horizon: f64,
    paths: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    let cfg = space.config();
    let alpha = cfg.discount;
    if paths < 2 {
        return Err(Error::InvalidConfig("at least two paths are needed for a standard error".into()));
    }
    let steps: Vec<Step> = space
        .states()
        .iter()
        .zip(actions)
        .map(|(s, &a)| {
            if !feasible_unchecked(s, cfg).contains(&a) {
                return Err(Error::ContractViolation(format!("action {a} infeasible in state {s}")));
            }
            let (replicas, queue) = apply_unchecked(s, a, cfg);
            let mut acc = 0.0;
            let successors = transitions_unchecked(s, a, cfg)
                .into_iter()
                .map(|t| {
                    acc += t.prob;
                    let j = space.index_of(&t.next).ok_or_else(|| {
                        Error::Internal(format!("successor {} outside the state space", t.next))
                    })?;
                    Ok((acc, j))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Step {
                income: income(s, cfg),
                cost_rate: holding_cost(&replicas, &queue, cfg),
                rate: rate_unchecked(s, a, cfg),
                successors,
            })
        })
        .collect::<Result<_>>()?;

    let samples: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(path as u64);
            let mut t = 0.0;
            let mut s = start;
            let mut total = 0.0;
            while t < horizon {
                let step = &steps[s];
                let discount = (-alpha * t).exp();
                total += discount * step.income;
                let sojourn = Exp::new(step.rate).expect("positive rate").sample(&mut rng);
                total -= discount * step.cost_rate * (1.0 - (-alpha * sojourn).exp()) / alpha;
                t += sojourn;
                let u: f64 = rng.random::<f64>() * step.successors.last().map_or(1.0, |l| l.0);
                s = step
                    .successors
                    .iter()
                    .find(|(c, _)| u < *c)
                    .unwrap_or_else(|| step.successors.last().expect("non-empty"))
                    .1;
            }
            total
        })
        .collect();

    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MonteCarloEstimate {
        mean,
        stderr: (var / n).sqrt(),
        paths,
    })
}
