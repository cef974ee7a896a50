//! Line-oriented policy export.
//!
//! ```text
//! # edgescale policy v1
//! config_hash = 3f0c...
//! rho = 4
//! ...
//! replicas;queue;event;action;value
//! 0;0;A1;+1;-3.21
//! ```
//!
//! Header lines are `key = value`; rows follow the column line, one per
//! enumerated state, in enumeration order. Floats use Rust's shortest
//! round-trip rendering so a written file reads back bit-exactly.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use super::{Policy, UniformizedModel};
use crate::error::{Error, Result};
use crate::model::{join, Action, EventMode, StateSpace, SystemState};

const MAGIC: &str = "# edgescale policy v1";
const COLUMNS: &str = "replicas;queue;event;action;value";

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyHeader {
    pub config_hash: String,
    pub rho: f64,
    pub lambda_bar: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub n_classes: usize,
    pub n_nodes: usize,
    pub max_replicas: u32,
    pub max_queue: u32,
    pub event_mode: EventMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRow {
    pub state: SystemState,
    pub action: Action,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile {
    pub header: PolicyHeader,
    pub rows: Vec<PolicyRow>,
}

impl PolicyFile {
    pub fn new(space: &StateSpace, model: &UniformizedModel, policy: &Policy) -> Self {
        let cfg = space.config();
        let header = PolicyHeader {
            config_hash: cfg.fingerprint(),
            rho: model.rho,
            lambda_bar: model.lambda_bar,
            epsilon: cfg.epsilon,
            iterations: policy.iterations,
            final_residual: policy.final_residual(),
            n_classes: cfg.n_classes,
            n_nodes: cfg.n_nodes,
            max_replicas: cfg.max_replicas,
            max_queue: cfg.max_queue,
            event_mode: cfg.event_mode,
        };
        let rows = space
            .states()
            .iter()
            .zip(policy.actions.iter().zip(&policy.values))
            .map(|(s, (&action, &value))| PolicyRow {
                state: s.clone(),
                action,
                value,
            })
            .collect();
        PolicyFile { header, rows }
    }

    pub fn render(&self) -> String {
        let h = &self.header;
        let mode = match h.event_mode {
            EventMode::Aggregated => "aggregated",
            EventMode::NodeIndexed => "node_indexed",
        };
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "config_hash = {}", h.config_hash);
        let _ = writeln!(out, "rho = {}", h.rho);
        let _ = writeln!(out, "lambda_bar = {}", h.lambda_bar);
        let _ = writeln!(out, "epsilon = {}", h.epsilon);
        let _ = writeln!(out, "iterations = {}", h.iterations);
        let _ = writeln!(out, "final_residual = {}", h.final_residual);
        let _ = writeln!(out, "n_classes = {}", h.n_classes);
        let _ = writeln!(out, "n_nodes = {}", h.n_nodes);
        let _ = writeln!(out, "max_replicas = {}", h.max_replicas);
        let _ = writeln!(out, "max_queue = {}", h.max_queue);
        let _ = writeln!(out, "event_mode = {mode}");
        let _ = writeln!(out, "states = {}", self.rows.len());
        let _ = writeln!(out, "{COLUMNS}");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{};{};{};{};{}",
                join(&r.state.replicas),
                join(&r.state.queue),
                r.state.event,
                r.action,
                r.value
            );
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::parse(origin, line, msg);
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim() == MAGIC => {}
            _ => return Err(err(1, format!("missing `{MAGIC}` marker"))),
        }
        let mut fields = std::collections::HashMap::new();
        let mut declared_states = None;
        for (no, line) in lines.by_ref() {
            let line = line.trim();
            if line == COLUMNS {
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(no, format!("expected `key = value`, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "states" {
                declared_states = Some(v.parse::<usize>().map_err(|e| err(no, e.to_string()))?);
            } else {
                fields.insert(k.to_string(), (no, v.to_string()));
            }
        }
        fn get<T: std::str::FromStr>(
            fields: &std::collections::HashMap<String, (usize, String)>,
            key: &str,
            origin: &Path,
        ) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            let (no, raw) = fields
                .get(key)
                .ok_or_else(|| Error::parse(origin, 0, format!("header is missing `{key}`")))?;
            raw.parse::<T>().map_err(|e| Error::parse(origin, *no, format!("{key}: {e}")))
        }
        let event_mode = match get::<String>(&fields, "event_mode", origin)?.as_str() {
            "aggregated" => EventMode::Aggregated,
            "node_indexed" => EventMode::NodeIndexed,
            other => return Err(err(0, format!("unknown event_mode `{other}`"))),
        };
        let header = PolicyHeader {
            config_hash: get(&fields, "config_hash", origin)?,
            rho: get(&fields, "rho", origin)?,
            lambda_bar: get(&fields, "lambda_bar", origin)?,
            epsilon: get(&fields, "epsilon", origin)?,
            iterations: get(&fields, "iterations", origin)?,
            final_residual: get(&fields, "final_residual", origin)?,
            n_classes: get(&fields, "n_classes", origin)?,
            n_nodes: get(&fields, "n_nodes", origin)?,
            max_replicas: get(&fields, "max_replicas", origin)?,
            max_queue: get(&fields, "max_queue", origin)?,
            event_mode,
        };

        let vector = |no: usize, raw: &str| -> Result<Vec<u32>> {
            let v = raw
                .split(',')
                .map(|x| x.trim().parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| err(no, e.to_string()))?;
            if v.len() != header.n_classes {
                return Err(err(no, format!("expected {} classes", header.n_classes)));
            }
            Ok(v)
        };
        let mut rows = Vec::new();
        for (no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(';').collect();
            let [replicas, queue, event, action, value] = parts[..] else {
                return Err(err(no, format!("expected 5 fields, got {}", parts.len())));
            };
            let state = SystemState::new(
                vector(no, replicas)?,
                vector(no, queue)?,
                event.parse().map_err(|e: String| err(no, e))?,
            );
            rows.push(PolicyRow {
                state,
                action: action.parse().map_err(|e: String| err(no, e))?,
                value: value.parse().map_err(|e: std::num::ParseFloatError| err(no, e.to_string()))?,
            });
        }
        if let Some(n) = declared_states {
            if n != rows.len() {
                return Err(err(0, format!("header declares {n} states but {} rows follow", rows.len())));
            }
        }
        Ok(PolicyFile { header, rows })
    }
}

pub fn write_policy(path: impl AsRef<Path>, file: &PolicyFile) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(file.render().as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_policy(path: impl AsRef<Path>) -> Result<PolicyFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    PolicyFile::parse(&text, path)
}
