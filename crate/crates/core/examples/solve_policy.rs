//! Solve the scaling SMDP of a preset and write the policy table.
//!
//! cargo run --release --example solve_policy -- [preset] [out]

use edgescale::model::{Action, StateSpace};
use edgescale::presets;
use edgescale::solver::{uniformize, write_policy, PolicyFile, ValueIteration};

fn main() -> edgescale::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "tiny".into());
    let out = args.next().unwrap_or_else(|| "policy.txt".into());
    let cfg = presets::resolve(&name)?;

    let space = StateSpace::enumerate(&cfg)?;
    let model = uniformize(&space)?;
    let policy = ValueIteration::new(cfg.epsilon).solve(&model)?;
    println!("{name}: {} states, rho {}, lambda_bar {:.6}", space.len(), model.rho, model.lambda_bar);
    println!("{} sweeps, final residual {:.2e}", policy.iterations, policy.final_residual());

    for a in Action::PREFERENCE {
        let n = policy.actions.iter().filter(|&&x| x == a).count();
        println!("  action {a:>2}: {n} states");
    }
    let s0 = space.initial_index();
    println!("value of the empty system: {:.6}", policy.values[s0]);

    write_policy(&out, &PolicyFile::new(&space, &model, &policy))?;
    println!("policy written to {out}");
    Ok(())
}
