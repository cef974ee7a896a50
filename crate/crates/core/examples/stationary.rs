//! Long-run averages of an optimal policy from the stationary distribution
//! of the uniformized chain, next to a simulation of the same policy.
//!
//! The model lets every replica complete work at rate mu whether or not a
//! request is waiting, so it counts idle replicas as serving. The simulator
//! only completes real requests. The two agree when replicas stay busy and
//! drift apart when the policy keeps idle replicas around, as it does here
//! with free replicas.

use edgescale::model::StateSpace;
use edgescale::presets;
use edgescale::scalers::{PolicyTable, SmdpScaler};
use edgescale::simulator::{run, SimConfig};
use edgescale::solver::{expected_metrics, stationary_distribution, uniformize, ValueIteration};

fn main() -> edgescale::Result<()> {
    let mut cfg = presets::tiny();
    cfg.unit_cost = 0.0;
    let space = StateSpace::enumerate(&cfg)?;
    let model = uniformize(&space)?;
    let policy = ValueIteration::new(cfg.epsilon).solve(&model)?;
    let dist = stationary_distribution(&policy, &model, &space)?;
    let m = expected_metrics(&dist, &policy, &model, &space)?;
    println!("stationary residual {:.1e}", dist.residual);
    println!("model: held replicas {:.4}, held queue {:.4}", m.total_held_replicas(), m.held_queue[0]);

    let sim = SimConfig::new(cfg.clone(), 500_000, 3);
    let run = run(&sim, &mut SmdpScaler::new(PolicyTable::from_policy(&space, &policy)))?;
    println!("simulation: replicas {:.4}, max queue {}", run.avg_replicas, run.max_queue);
    Ok(())
}
