//! Heuristics on the large network across three monitoring thresholds. The
//! SMDP is requested too and shows up as skipped: its state space is far
//! beyond the solver limit.

use edgescale::presets;
use edgescale::reporting::{aggregate, emit, run_sweep, ScalerSpec, SweepPoint, SweepSpec};

fn main() -> edgescale::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "sweep-large".into());
    let mut spec = SweepSpec::new("large", presets::large());
    spec.points = [1.0, 2.0, 4.0, 8.0].map(SweepPoint::Scale).to_vec();
    spec.scalers = vec![ScalerSpec::Smdp, ScalerSpec::Random];
    spec.scalers
        .extend([0.1, 0.05, 0.01].map(|threshold| ScalerSpec::Monitoring { threshold }));
    spec.seeds = (1..=3).collect();
    spec.horizon_events = 100_000;

    let outcome = run_sweep(&spec)?;
    emit(&out, &outcome)?;
    for r in aggregate(&outcome.rows) {
        println!(
            "lambda {:>5.1} {:>4} {:>5}: delay {:.5}  replicas {:.2}",
            r.lambda,
            r.scaler,
            r.threshold.map_or(String::new(), |t| t.to_string()),
            r.avg_delay.mean,
            r.avg_replicas.mean
        );
    }
    if let Some(first) = outcome.skipped.first() {
        println!("{} smdp cells skipped: {}", outcome.skipped.len(), first.reason);
    }
    Ok(())
}
