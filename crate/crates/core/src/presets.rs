//! Built-in scenarios: the small and large networks of the evaluation, and
//! a reduction of either to fewer classes and nodes so the SMDP stays
//! tractable.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{EventMode, ScalingConfig};

pub const SMALL_TOML: &str = include_str!("../presets/small.toml");
pub const LARGE_TOML: &str = include_str!("../presets/large.toml");

/// Names accepted by [`resolve`].
pub const NAMES: [&str; 4] = ["tiny", "small", "large", "small-reduced"];

/// One node of capacity 2 and one class with b = 1, M = Q_m = 2. Small
/// enough for exhaustive policy search.
pub fn tiny() -> ScalingConfig {
    ScalingConfig {
        n_nodes: 1,
        n_classes: 1,
        cpu_demand: vec![1],
        capacity: vec![2],
        arrival_rate: vec![2.0],
        service_rate: vec![1.0],
        income: vec![1.0],
        unit_cost: 1.0,
        discount: 0.1,
        epsilon: 1e-6,
        max_replicas: 2,
        max_queue: 2,
        event_mode: EventMode::Aggregated,
    }
}

pub fn small() -> ScalingConfig {
    ScalingConfig::from_toml_str(SMALL_TOML).expect("bundled preset is valid")
}

pub fn large() -> ScalingConfig {
    ScalingConfig::from_toml_str(LARGE_TOML).expect("bundled preset is valid")
}

/// The small network cut down to two classes on two nodes, with truncation
/// bounds sized for the solver. Replicas are free, so the objective is
/// income minus queueing delay only: with the queue truncated at a few
/// requests, a positive replica price makes the optimum refuse to scale.
pub fn small_reduced() -> ScalingConfig {
    let mut cfg = reduced(&small(), 2, 2).expect("small preset reduces");
    cfg.unit_cost = 0.0;
    cfg.max_replicas = 12;
    cfg.max_queue = 8;
    cfg
}

/// Keeps the first `classes` classes and `nodes` nodes of `base`. Arrival
/// and service rates are re-spaced evenly over the base's ranges so the
/// reduced instance still spans them.
pub fn reduced(base: &ScalingConfig, classes: usize, nodes: usize) -> Result<ScalingConfig> {
    if classes == 0 || classes > base.n_classes || nodes == 0 || nodes > base.n_nodes {
        return Err(Error::InvalidConfig(format!(
            "cannot reduce {}x{} to {classes} classes on {nodes} nodes",
            base.n_classes, base.n_nodes
        )));
    }
    let mut cfg = base.clone();
    cfg.n_classes = classes;
    cfg.n_nodes = nodes;
    cfg.cpu_demand.truncate(classes);
    cfg.income.truncate(classes);
    cfg.capacity.truncate(nodes);
    cfg.arrival_rate = respace(&base.arrival_rate, classes);
    cfg.service_rate = respace(&base.service_rate, classes);
    cfg.validate()?;
    Ok(cfg)
}

fn respace(values: &[f64], n: usize) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// A preset name or a path to a TOML configuration.
pub fn resolve(spec: &str) -> Result<ScalingConfig> {
    match spec {
        "tiny" => Ok(tiny()),
        "small" => Ok(small()),
        "large" => Ok(large()),
        "small-reduced" => Ok(small_reduced()),
        path => ScalingConfig::load(Path::new(path)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_matches_the_table() {
        let cfg = small();
        assert_eq!((cfg.n_nodes, cfg.n_classes), (3, 5));
        assert_eq!(cfg.cpu_demand, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.capacity, vec![16; 3]);
        assert_eq!((cfg.unit_cost, cfg.income.clone()), (1.0, vec![1.0; 5]));
        assert_eq!(cfg.arrival_rate.first(), Some(&2.0));
        assert_eq!(cfg.arrival_rate.last(), Some(&11.0));
        assert_eq!(cfg.service_rate.first(), Some(&1.0));
        assert_eq!(cfg.service_rate.last(), Some(&11.0));
    }

    #[test]
    fn large_matches_the_table() {
        let cfg = large();
        assert_eq!((cfg.n_nodes, cfg.n_classes), (10, 10));
        assert_eq!(cfg.cpu_demand, (1..=10).collect::<Vec<_>>());
        assert_eq!(cfg.capacity, vec![100; 10]);
        assert_eq!(cfg.arrival_rate.first(), Some(&4.0));
        assert_eq!(cfg.arrival_rate.last(), Some(&12.0));
        assert_eq!(cfg.service_rate, (1..=10).map(|k| 10.0 * k as f64).collect::<Vec<_>>());
    }

    #[test]
    fn reduction_keeps_the_ranges() {
        let cfg = small_reduced();
        assert_eq!((cfg.n_nodes, cfg.n_classes), (2, 2));
        assert_eq!(cfg.arrival_rate, vec![2.0, 11.0]);
        assert_eq!(cfg.service_rate, vec![1.0, 11.0]);
        assert_eq!(cfg.cpu_demand, vec![1, 2]);
        assert_eq!(cfg.capacity, vec![16, 16]);
        assert_eq!(cfg.unit_cost, 0.0);
        assert!(reduced(&small(), 6, 1).is_err());
        assert_eq!(reduced(&small(), 1, 1).unwrap().arrival_rate, vec![2.0]);
    }

    #[test]
    fn resolve_names_and_paths() {
        for name in NAMES {
            resolve(name).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, SMALL_TOML).unwrap();
        assert_eq!(resolve(path.to_str().unwrap()).unwrap(), small());
        assert!(resolve("/nonexistent/x.toml").is_err());
    }
}
