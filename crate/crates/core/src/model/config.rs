use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Whether departure events carry the index of the node they leave from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EventMode {
    #[default]
    Aggregated,
    NodeIndexed,
}

/// A full problem instance: the edge nodes, the function classes and the
/// truncation bounds that make the state space finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub n_nodes: usize,
    pub n_classes: usize,
    /// CPU units one replica of class k occupies.
    pub cpu_demand: Vec<u32>,
    /// CPU units available on node n.
    pub capacity: Vec<u32>,
    pub arrival_rate: Vec<f64>,
    /// Completion rate of a single replica of class k.
    pub service_rate: Vec<f64>,
    /// Lump-sum income for accepting a class-k request.
    pub income: Vec<f64>,
    /// Cost per CPU unit per unit time.
    pub unit_cost: f64,
    /// Continuous-time discount rate.
    pub discount: f64,
    /// Value-iteration stopping tolerance.
    pub epsilon: f64,
    /// Per-class replica cap used for enumeration.
    pub max_replicas: u32,
    /// Per-class queue-length cap used for enumeration.
    pub max_queue: u32,
    #[serde(default)]
    pub event_mode: EventMode,
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let k = self.n_classes;
        if k == 0 {
            return bad("n_classes must be at least 1".into());
        }
        if self.n_nodes == 0 {
            return bad("n_nodes must be at least 1".into());
        }
        for (name, len) in [
            ("cpu_demand", self.cpu_demand.len()),
            ("arrival_rate", self.arrival_rate.len()),
            ("service_rate", self.service_rate.len()),
            ("income", self.income.len()),
        ] {
            if len != k {
                return bad(format!("{name} has {len} entries, expected n_classes = {k}"));
            }
        }
        if self.capacity.len() != self.n_nodes {
            return bad(format!(
                "capacity has {} entries, expected n_nodes = {}",
                self.capacity.len(),
                self.n_nodes
            ));
        }
        if self.capacity.contains(&0) {
            return bad("every node capacity must be positive".into());
        }
        let biggest = self.capacity.iter().copied().max().unwrap_or(0);
        for (i, &b) in self.cpu_demand.iter().enumerate() {
            if b == 0 {
                return bad(format!("cpu_demand[{}] must be positive", i + 1));
            }
            if b > biggest {
                return bad(format!(
                    "cpu_demand[{}] = {b} does not fit on any node (largest capacity {biggest})",
                    i + 1
                ));
            }
        }
        let positive = |name: &str, xs: &[f64]| -> Result<()> {
            match xs.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
                Some(i) => bad(format!("{name}[{}] must be a positive finite number", i + 1)),
                None => Ok(()),
            }
        };
        positive("arrival_rate", &self.arrival_rate)?;
        positive("service_rate", &self.service_rate)?;
        if let Some(i) = self.income.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad(format!("income[{}] must be non-negative", i + 1));
        }
        if !(self.unit_cost.is_finite() && self.unit_cost >= 0.0) {
            return bad("unit_cost must be non-negative".into());
        }
        if !(self.discount.is_finite() && self.discount > 0.0) {
            return bad("discount must be positive".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if self.max_replicas == 0 {
            return bad("max_replicas must be at least 1".into());
        }
        Ok(())
    }

    pub fn total_capacity(&self) -> u64 {
        self.capacity.iter().map(|&c| c as u64).sum()
    }

    pub fn total_arrival_rate(&self) -> f64 {
        self.arrival_rate.iter().sum()
    }

    pub fn mean_arrival_rate(&self) -> f64 {
        self.total_arrival_rate() / self.n_classes as f64
    }

    /// Multiplies every arrival rate by `factor`.
    pub fn scaled_arrivals(&self, factor: f64) -> Self {
        let mut cfg = self.clone();
        for l in &mut cfg.arrival_rate {
            *l *= factor;
        }
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScalingConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Stable fingerprint of the instance, first 16 hex digits of SHA-256
    /// over the canonical TOML rendering.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Applies a `key=value` override. Vector fields take comma-separated values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.apply_overrides(&[(key, value)])
    }

    /// Applies several overrides at once and validates only the result, so
    /// fields that must agree (class count and per-class vectors) can change
    /// together.
    pub fn apply_overrides(&mut self, pairs: &[(&str, &str)]) -> Result<()> {
        // Round-trip through a TOML table so every field uses its serde parser.
        let mut table: toml::Table = toml::from_str(&self.to_toml_string())
            .map_err(|e| Error::Internal(e.to_string()))?;
        for &(key, value) in pairs {
            let Some(current) = table.get(key) else {
                return Err(Error::InvalidConfig(format!("unknown configuration key `{key}`")));
            };
            let parsed = parse_like(current, value)
                .ok_or_else(|| Error::InvalidConfig(format!("cannot parse `{value}` for `{key}`")))?;
            table.insert(key.to_string(), parsed);
        }
        let cfg: ScalingConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        *self = cfg;
        Ok(())
    }
}

fn parse_like(template: &toml::Value, raw: &str) -> Option<toml::Value> {
    use toml::Value;
    let raw = raw.trim();
    Some(match template {
        Value::Integer(_) => Value::Integer(raw.parse().ok()?),
        Value::Float(_) => Value::Float(raw.parse().ok()?),
        Value::String(_) => Value::String(raw.to_string()),
        Value::Boolean(_) => Value::Boolean(raw.parse().ok()?),
        Value::Array(items) => {
            let elem = items.first().cloned().unwrap_or(Value::Float(0.0));
            let raw = raw.trim_start_matches('[').trim_end_matches(']');
            let values = raw
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| parse_like(&elem, s))
                .collect::<Option<Vec<_>>>()?;
            Value::Array(values)
        }
        _ => return None,
    })
}
