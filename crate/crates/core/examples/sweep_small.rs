//! Delay and replica curves over arrival rate for the reduced small network,
//! every scaler under both allocators. Writes rows.csv, aggregate.csv and
//! skipped.csv.
//!
//! cargo run --release --example sweep_small -- [out-dir]

use edgescale::presets;
use edgescale::reporting::{aggregate, emit, run_sweep, ScalerSpec, SweepPoint, SweepSpec};
use edgescale::simulator::Allocator;

fn main() -> edgescale::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "sweep-small".into());
    let mut spec = SweepSpec::new("small-reduced", presets::small_reduced());
    spec.points = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0].map(SweepPoint::Scale).to_vec();
    spec.scalers = vec![
        ScalerSpec::Smdp,
        ScalerSpec::Monitoring { threshold: 1.0 },
        ScalerSpec::Monitoring { threshold: 0.5 },
        ScalerSpec::Random,
    ];
    spec.allocators = vec![Allocator::FirstFit, Allocator::RandomFit];
    spec.seeds = (1..=5).collect();
    spec.horizon_events = 100_000;

    let outcome = run_sweep(&spec)?;
    emit(&out, &outcome)?;
    for r in aggregate(&outcome.rows).iter().filter(|r| r.allocator == Allocator::FirstFit) {
        println!(
            "lambda {:>5.2} {:>4} {:>4}: delay {:.4} +- {:.4}  replicas {:.2}",
            r.lambda,
            r.scaler,
            r.threshold.map_or(String::new(), |t| t.to_string()),
            r.avg_delay.mean,
            r.avg_delay.ci95.unwrap_or(0.0),
            r.avg_replicas.mean
        );
    }
    println!("{} rows written to {out}", outcome.rows.len());
    Ok(())
}
