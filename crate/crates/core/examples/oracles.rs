//! Independent references: exhaustive policy search, Erlang-C and a
//! Monte-Carlo estimate of the discounted value.

use edgescale::model::StateSpace;
use edgescale::oracle::{brute_force_optimal, erlang_c_delay, monte_carlo_value, policy_count};
use edgescale::presets;
use edgescale::solver::{uniformize, ValueIteration};

fn main() -> edgescale::Result<()> {
    let cfg = presets::tiny();
    let space = StateSpace::enumerate(&cfg)?;
    let model = uniformize(&space)?;
    let vi = ValueIteration::new(1e-10).solve(&model)?;
    let bf = brute_force_optimal(&model)?;
    let gap = vi.values.iter().zip(&bf.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!(
        "exhaustive search over {} policies: same policy {}, max value gap {gap:.2e}",
        policy_count(&model),
        vi.actions == bf.actions
    );

    let s0 = space.initial_index();
    let mc = monte_carlo_value(&space, &vi.actions, s0, 20.0 / cfg.discount, 10_000, 1)?;
    println!("v(empty) = {:.5}, Monte Carlo {:.5} +- {:.5}", vi.values[s0], mc.mean, mc.stderr);

    for (lambda, mu, m) in [(0.5, 1.0, 1), (2.0, 1.0, 3), (9.0, 1.0, 10)] {
        let e = erlang_c_delay(lambda, mu, m)?;
        println!(
            "M/M/{m} lambda {lambda} mu {mu}: wait prob {:.4}, wait {:.4}, sojourn {:.4}",
            e.wait_prob, e.mean_wait, e.mean_sojourn
        );
    }
    Ok(())
}
