//! Monitoring and random-fit scaling on the small network, one run each.

use edgescale::presets;
use edgescale::scalers::{MonitoringScaler, RandomScaler, Scaler};
use edgescale::simulator::{run, SimConfig};

fn main() -> edgescale::Result<()> {
    let cfg = presets::small();
    let sim = SimConfig::new(cfg, 200_000, 42);
    let mut scalers: Vec<Box<dyn Scaler>> = vec![
        Box::new(MonitoringScaler::new(1.0)),
        Box::new(MonitoringScaler::new(0.5)),
        Box::new(MonitoringScaler::new(0.1)),
        Box::new(RandomScaler::new(42)),
    ];
    println!("{:>8} {:>9} {:>10} {:>9} {:>10}", "scaler", "threshold", "delay", "replicas", "max queue");
    for s in &mut scalers {
        let m = run(&sim, s.as_mut())?;
        let t = s.threshold().map_or("-".into(), |t| t.to_string());
        let d = m.avg_delay.map_or("n/a".into(), |d| format!("{d:.4}"));
        println!("{:>8} {t:>9} {d:>10} {:>9.3} {:>10}", s.name(), m.avg_replicas, m.max_queue);
    }
    Ok(())
}
