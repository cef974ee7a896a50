use nalgebra::{DMatrix, DVector};

use super::{Policy, UniformizedModel};
use crate::error::{Error, Result};
use crate::model::{apply_unchecked, StateSpace};

const POWER_TOLERANCE: f64 = 1e-10;
const POWER_MAX_STEPS: usize = 200_000;
const DIRECT_SOLVE_LIMIT: usize = 5_000;

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
    /// `max_s |(pi P)(s) - pi(s)|` at return.
    pub residual: f64,
}

/// Stationary distribution of the uniformized chain induced by `policy`,
/// started from the empty system.
pub fn stationary_distribution(
    policy: &Policy,
    model: &UniformizedModel,
    space: &StateSpace,
) -> Result<StationaryDistribution> {
    let rows = model.policy_rows(&policy.actions)?;
    let mut start = vec![0.0; rows.len()];
    start[space.initial_index()] = 1.0;
    stationary_from_rows(&rows, &start)
}

/// Solves `pi P = pi`, `sum pi = 1` for the chain given as sparse rows.
///
/// Power iteration runs on the lazy chain `(I + P) / 2`, which shares its
/// stationary distributions with `P` but is aperiodic. Starting from `start`
/// it converges to the limit reached from that initial distribution, so
/// with several recurrent classes the result lives on the ones `start`
/// reaches. Small chains that fail to converge fall back to a dense solve.
pub fn stationary_from_rows(rows: &[Vec<(u32, f64)>], start: &[f64]) -> Result<StationaryDistribution> {
    let n = rows.len();
    if start.len() != n {
        return Err(Error::ContractViolation("initial vector length differs from the chain".into()));
    }
    let mut pi = start.to_vec();
    let total: f64 = pi.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::ContractViolation("initial vector has no mass".into()));
    }
    pi.iter_mut().for_each(|p| *p /= total);

    let mut moved = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_MAX_STEPS {
        step(rows, &pi, &mut moved);
        residual = pi.iter().zip(&moved).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual <= POWER_TOLERANCE {
            return Ok(StationaryDistribution { pi, residual });
        }
        for (p, m) in pi.iter_mut().zip(&moved) {
            *p = 0.5 * (*p + m);
        }
    }
    if n < DIRECT_SOLVE_LIMIT {
        return direct(rows, start);
    }
    Err(Error::StationaryNonConvergence {
        iterations: POWER_MAX_STEPS,
        residual,
    })
}

fn step(rows: &[Vec<(u32, f64)>], pi: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (i, row) in rows.iter().enumerate() {
        let mass = pi[i];
        if mass == 0.0 {
            continue;
        }
        for &(j, p) in row {
            out[j as usize] += mass * p;
        }
    }
}

/// Dense solve restricted to the states reachable from the support of `start`.
fn direct(rows: &[Vec<(u32, f64)>], start: &[f64]) -> Result<StationaryDistribution> {
    let n = rows.len();
    let mut reach = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&i| start[i] > 0.0).collect();
    for &i in &stack {
        reach[i] = true;
    }
    while let Some(i) = stack.pop() {
        for &(j, p) in &rows[i] {
            let j = j as usize;
            if p > 0.0 && !reach[j] {
                reach[j] = true;
                stack.push(j);
            }
        }
    }
    let members: Vec<usize> = (0..n).filter(|&i| reach[i]).collect();
    let mut local = vec![usize::MAX; n];
    for (li, &g) in members.iter().enumerate() {
        local[g] = li;
    }
    let m = members.len();
    // (P - I)^T pi = 0 with the last equation replaced by the normalisation.
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (li, &g) in members.iter().enumerate() {
        a[(li, li)] -= 1.0;
        for &(j, p) in &rows[g] {
            a[(local[j as usize], li)] += p;
        }
    }
    for c in 0..m {
        a[(m - 1, c)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Internal("stationary system is singular (several recurrent classes)".into()))?;
    let mut pi = vec![0.0; n];
    for (li, &g) in members.iter().enumerate() {
        pi[g] = x[li].max(0.0);
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    let mut moved = vec![0.0; n];
    step(rows, &pi, &mut moved);
    let residual = pi.iter().zip(&moved).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(StationaryDistribution { pi, residual })
}

/// Long-run averages under a stationary distribution of the uniformized chain.
///
/// The uniformized chain spends time in each state in proportion to its
/// stationary mass. `avg_*` average the state's own vectors; `held_*`
/// average the post-action configuration the system actually holds until
/// the next event, which is what a time-weighted simulation observes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedMetrics {
    pub avg_queue: Vec<f64>,
    pub avg_replicas: Vec<f64>,
    pub held_queue: Vec<f64>,
    pub held_replicas: Vec<f64>,
    /// `sum_s pi(s) r(s, d(s)) gamma(s, d(s))`.
    pub avg_reward_rate: f64,
}

impl ExpectedMetrics {
    pub fn total_held_replicas(&self) -> f64 {
        self.held_replicas.iter().sum()
    }
}

pub fn expected_metrics(
    dist: &StationaryDistribution,
    policy: &Policy,
    model: &UniformizedModel,
    space: &StateSpace,
) -> Result<ExpectedMetrics> {
    let cfg = space.config();
    let k = cfg.n_classes;
    let mut avg_queue = vec![0.0; k];
    let mut avg_replicas = vec![0.0; k];
    let mut held_queue = vec![0.0; k];
    let mut held_replicas = vec![0.0; k];
    let mut avg_reward_rate = 0.0;
    for (i, s) in space.states().iter().enumerate() {
        let p = dist.pi[i];
        if p == 0.0 {
            continue;
        }
        let a = policy.actions[i];
        let row = model
            .row(i, a)
            .ok_or_else(|| Error::ContractViolation(format!("action {a} infeasible in state {s}")))?;
        let (replicas, queue) = apply_unchecked(s, a, cfg);
        for c in 0..k {
            avg_queue[c] += p * s.queue[c] as f64;
            avg_replicas[c] += p * s.replicas[c] as f64;
            held_queue[c] += p * queue[c] as f64;
            held_replicas[c] += p * replicas[c] as f64;
        }
        // undo the uniformization scaling to recover r(s, a)
        let reward = row.rbar * (model.rho + model.alpha) / (row.gamma + model.alpha);
        avg_reward_rate += p * reward * row.gamma;
    }
    Ok(ExpectedMetrics {
        avg_queue,
        avg_replicas,
        held_queue,
        held_replicas,
        avg_reward_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tiny_config;
    use crate::solver::{uniformize, ValueIteration};
    use approx::assert_abs_diff_eq;

    #[test]
    fn periodic_two_state_chain() {
        let rows = vec![vec![(1, 1.0)], vec![(0, 1.0)]];
        let d = stationary_from_rows(&rows, &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(d.pi[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(d.pi[1], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn identity_chain_keeps_initial_state() {
        let rows = vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(2, 1.0)]];
        let d = stationary_from_rows(&rows, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(d.pi, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn direct_solve_agrees_with_power_iteration() {
        let rows = vec![
            vec![(0, 0.5), (1, 0.5)],
            vec![(0, 0.2), (2, 0.8)],
            vec![(0, 0.6), (2, 0.4)],
        ];
        let power = stationary_from_rows(&rows, &[1.0, 0.0, 0.0]).unwrap();
        let dense = direct(&rows, &[1.0, 0.0, 0.0]).unwrap();
        for (a, b) in power.pi.iter().zip(&dense.pi) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        assert!(dense.residual < 1e-12);
    }

    #[test]
    fn tiny_optimal_chain_is_stationary() {
        let space = StateSpace::enumerate(&tiny_config()).unwrap();
        let model = uniformize(&space).unwrap();
        let policy = ValueIteration::new(1e-8).solve(&model).unwrap();
        let d = stationary_distribution(&policy, &model, &space).unwrap();
        assert_abs_diff_eq!(d.pi.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        let rows = model.policy_rows(&policy.actions).unwrap();
        let mut moved = vec![0.0; rows.len()];
        step(&rows, &d.pi, &mut moved);
        for (a, b) in d.pi.iter().zip(&moved) {
            assert!((a - b).abs() <= 1e-8);
        }
        // a different start inside the same recurrent class lands on the same answer
        let support = d.pi.iter().position(|&p| p > 1e-3).unwrap();
        let mut start = vec![0.0; rows.len()];
        start[support] = 1.0;
        let other = stationary_from_rows(&rows, &start).unwrap();
        for (a, b) in d.pi.iter().zip(&other.pi) {
            assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn point_mass_metrics() {
        let space = StateSpace::enumerate(&tiny_config()).unwrap();
        let model = uniformize(&space).unwrap();
        let policy = ValueIteration::new(1e-8).solve(&model).unwrap();
        let target = 7;
        let mut pi = vec![0.0; space.len()];
        pi[target] = 1.0;
        let dist = StationaryDistribution { pi, residual: 0.0 };
        let m = expected_metrics(&dist, &policy, &model, &space).unwrap();
        let s = space.state(target);
        assert_eq!(m.avg_replicas, vec![s.replicas[0] as f64]);
        assert_eq!(m.avg_queue, vec![s.queue[0] as f64]);
        let (d, q) = apply_unchecked(s, policy.actions[target], space.config());
        assert_eq!(m.held_replicas, vec![d[0] as f64]);
        assert_eq!(m.held_queue, vec![q[0] as f64]);

        let zero = model.map_rewards(|_, _| 0.0);
        let m = expected_metrics(&dist, &policy, &zero, &space).unwrap();
        assert_eq!(m.avg_reward_rate, 0.0);
    }

    #[test]
    fn tiny_replicas_match_the_simulator() {
        use crate::scalers::{PolicyTable, SmdpScaler};
        use crate::simulator::{run, SimConfig};
        let space = StateSpace::enumerate(&tiny_config()).unwrap();
        let model = uniformize(&space).unwrap();
        let policy = ValueIteration::new(1e-8).solve(&model).unwrap();
        let dist = stationary_distribution(&policy, &model, &space).unwrap();
        let expected = expected_metrics(&dist, &policy, &model, &space).unwrap().total_held_replicas();
        let sim = SimConfig::new(tiny_config(), 200_000, 4);
        let m = run(&sim, &mut SmdpScaler::new(PolicyTable::from_policy(&space, &policy))).unwrap();
        assert!((m.avg_replicas - expected).abs() <= 0.05 * expected.max(1e-12) || m.avg_replicas == expected);
    }
}
