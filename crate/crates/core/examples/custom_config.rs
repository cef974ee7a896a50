//! Build an instance from TOML, apply overrides and inspect it.

use edgescale::model::{state_space_size, CountFormula, ScalingConfig};

const TOML: &str = r#"
n_nodes = 2
n_classes = 2
cpu_demand = [1, 2]
capacity = [4, 4]
arrival_rate = [1.0, 0.5]
service_rate = [1.5, 1.0]
income = [1.0, 2.0]
unit_cost = 0.1
discount = 0.5
epsilon = 1e-6
max_replicas = 4
max_queue = 4
"#;

fn main() -> edgescale::Result<()> {
    let mut cfg = ScalingConfig::from_toml_str(TOML)?;
    cfg.apply_overrides(&[("arrival_rate", "2,1"), ("event_mode", "node_indexed")])?;
    println!("fingerprint {}", cfg.fingerprint());
    println!("mean arrival rate {}", cfg.mean_arrival_rate());
    println!("exact states {}", state_space_size(&cfg, CountFormula::ExactEnumeration)?);
    print!("{}", cfg.to_toml_string());
    Ok(())
}
