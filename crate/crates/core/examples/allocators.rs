//! First-fit against random-fit placement for the same scaler and seeds.

use edgescale::presets;
use edgescale::reporting::Estimate;
use edgescale::scalers::MonitoringScaler;
use edgescale::simulator::{run, Allocator, SimConfig};

fn main() -> edgescale::Result<()> {
    let cfg = presets::small();
    for alloc in [Allocator::FirstFit, Allocator::RandomFit] {
        let mut delays = Vec::new();
        let mut replicas = Vec::new();
        for seed in 1..=5 {
            let mut sim = SimConfig::new(cfg.clone(), 100_000, seed);
            sim.allocator = alloc;
            let m = run(&sim, &mut MonitoringScaler::new(0.5))?;
            delays.push(m.avg_delay.unwrap_or(f64::NAN));
            replicas.push(m.avg_replicas);
        }
        let d = Estimate::of(&delays);
        let r = Estimate::of(&replicas);
        println!(
            "{alloc}: delay {:.5} +- {:.5}  replicas {:.3} +- {:.3}",
            d.mean,
            d.ci95.unwrap_or(0.0),
            r.mean,
            r.ci95.unwrap_or(0.0)
        );
    }
    Ok(())
}
