//! Print the first events of a run: time, event, action, node, replicas and
//! queue lengths.

use edgescale::presets;
use edgescale::scalers::RandomScaler;
use edgescale::simulator::{SimConfig, Simulation};

fn main() -> edgescale::Result<()> {
    let mut sim = SimConfig::new(presets::small(), 40, 5);
    sim.warmup_events = 0;
    sim.debug_checks = true;
    let mut out = std::io::stdout();
    let m = Simulation::new(sim)?.with_trace(&mut out).run(&mut RandomScaler::new(5))?;
    println!("{} completed, conservation balanced: {}", m.completed, m.conservation.balanced());
    Ok(())
}
