//! Solve the reduced small network, then drive the simulator with the
//! optimal policy next to the heuristics under common random numbers.

use edgescale::model::StateSpace;
use edgescale::presets;
use edgescale::scalers::{MonitoringScaler, PolicyTable, RandomScaler, Scaler, SmdpScaler};
use edgescale::simulator::{run, SimConfig};
use edgescale::solver::{uniformize, ValueIteration};

fn main() -> edgescale::Result<()> {
    let cfg = presets::small_reduced();
    let space = StateSpace::enumerate(&cfg)?;
    let policy = ValueIteration::new(cfg.epsilon).solve(&uniformize(&space)?)?;
    let table = PolicyTable::from_policy(&space, &policy);
    println!("solved {} states in {} sweeps", space.len(), policy.iterations);

    let sim = SimConfig::new(cfg, 100_000, 7);
    let mut scalers: Vec<Box<dyn Scaler>> = vec![
        Box::new(SmdpScaler::new(table)),
        Box::new(MonitoringScaler::new(1.0)),
        Box::new(MonitoringScaler::new(0.5)),
        Box::new(RandomScaler::new(7)),
    ];
    for s in &mut scalers {
        let m = run(&sim, s.as_mut())?;
        println!(
            "{:>5} {:>4}: delay {:.4}  replicas {:.3}  reward {:.1}",
            s.name(),
            s.threshold().map_or(String::new(), |t| t.to_string()),
            m.avg_delay.unwrap_or(f64::NAN),
            m.avg_replicas,
            m.total_reward
        );
    }
    Ok(())
}
