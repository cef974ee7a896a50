//! Parameter sweeps over arrival rate, scaler, threshold and allocator, with
//! multi-seed aggregation and CSV output.
//!
//! The `lambda` column is the mean per-class arrival rate of the point.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::model::{ScalingConfig, StateSpace, DEFAULT_STATE_LIMIT};
use crate::scalers::{MonitoringScaler, PolicyTable, RandomScaler, Scaler, SmdpScaler};
use crate::simulator::{run, Allocator, SimConfig};
use crate::solver::{uniformize, ValueIteration};

/// Marker line written at the top of aggregated and skipped-cell files.
pub const LAMBDA_NOTE: &str = "# lambda = mean per-class arrival rate of the sweep point";

const ROW_HEADER: [&str; 10] = [
    "scenario",
    "scaler",
    "allocator",
    "threshold",
    "lambda",
    "seed",
    "avg_delay",
    "avg_replicas",
    "throughput",
    "total_reward",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalerSpec {
    Smdp,
    Monitoring { threshold: f64 },
    Random,
}

impl ScalerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ScalerSpec::Smdp => "smdp",
            ScalerSpec::Monitoring { .. } => "mnt",
            ScalerSpec::Random => "rf",
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match *self {
            ScalerSpec::Monitoring { threshold } => Some(threshold),
            _ => None,
        }
    }
}

impl fmt::Display for ScalerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.threshold() {
            Some(t) => write!(f, "{}@{t}", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for ScalerSpec {
    type Err = String;

    /// `smdp`, `rf` or `mnt@<threshold>`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "smdp" => Ok(ScalerSpec::Smdp),
            "rf" => Ok(ScalerSpec::Random),
            other => {
                let t = other
                    .strip_prefix("mnt@")
                    .ok_or_else(|| format!("unknown scaler `{other}` (expected smdp, rf or mnt@<threshold>)"))?;
                let threshold = t.parse::<f64>().map_err(|e| format!("threshold `{t}`: {e}"))?;
                Ok(ScalerSpec::Monitoring { threshold })
            }
        }
    }
}

/// One arrival-rate setting of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepPoint {
    /// Multiplies every base arrival rate.
    Scale(f64),
    /// Replaces the arrival-rate vector.
    Rates(Vec<f64>),
}

impl SweepPoint {
    pub fn apply(&self, base: &ScalingConfig) -> Result<ScalingConfig> {
        let cfg = match self {
            SweepPoint::Scale(f) => base.scaled_arrivals(*f),
            SweepPoint::Rates(r) => ScalingConfig {
                arrival_rate: r.clone(),
                ..base.clone()
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub scenario: String,
    pub base: ScalingConfig,
    pub points: Vec<SweepPoint>,
    pub scalers: Vec<ScalerSpec>,
    pub allocators: Vec<Allocator>,
    pub seeds: Vec<u64>,
    pub horizon_events: u64,
    /// Defaults to a tenth of the horizon.
    pub warmup_events: Option<u64>,
    /// Largest SMDP state space solved before the cell is skipped.
    pub state_limit: u128,
}

impl SweepSpec {
    pub fn new(scenario: impl Into<String>, base: ScalingConfig) -> Self {
        Self {
            scenario: scenario.into(),
            base,
            points: vec![SweepPoint::Scale(1.0)],
            scalers: vec![ScalerSpec::Random],
            allocators: vec![Allocator::FirstFit],
            seeds: vec![1],
            horizon_events: 100_000,
            warmup_events: None,
            state_limit: DEFAULT_STATE_LIMIT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let empty = [
            ("points", self.points.is_empty()),
            ("scalers", self.scalers.is_empty()),
            ("allocators", self.allocators.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|x| x.1) {
            return Err(Error::InvalidConfig(format!("sweep has no {name}")));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.points.len() * self.scalers.len() * self.allocators.len() * self.seeds.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: String,
    pub scaler: String,
    pub allocator: Allocator,
    pub threshold: Option<f64>,
    pub lambda: f64,
    pub seed: u64,
    pub avg_delay: f64,
    pub avg_replicas: f64,
    pub throughput: f64,
    pub total_reward: f64,
}

/// A cell that produced no row, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub scenario: String,
    pub scaler: String,
    pub allocator: Allocator,
    pub threshold: Option<f64>,
    pub lambda: f64,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<SkippedCell>,
}

/// Solves the SMDP of one point, or explains why it could not be.
fn solve_point(cfg: &ScalingConfig, limit: u128) -> std::result::Result<PolicyTable, String> {
    let space = StateSpace::enumerate_with_limit(cfg, limit).map_err(|e| match e {
        Error::StateSpaceTooLarge { count, limit } => {
            format!("state space too large ({count} states, limit {limit})")
        }
        other => other.to_string(),
    })?;
    let model = uniformize(&space).map_err(|e| e.to_string())?;
    let policy = ValueIteration::new(cfg.epsilon).solve(&model).map_err(|e| e.to_string())?;
    Ok(PolicyTable::from_policy(&space, &policy))
}

/// Runs every (point, scaler, allocator, seed) cell. Rows come back in that
/// nesting order whatever the thread scheduling; failed cells are reported
/// in `skipped` rather than aborting the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let configs = spec
        .points
        .iter()
        .map(|p| p.apply(&spec.base))
        .collect::<Result<Vec<_>>>()?;
    let wants_smdp = spec.scalers.contains(&ScalerSpec::Smdp);
    let tables: Vec<Option<std::result::Result<PolicyTable, String>>> = configs
        .par_iter()
        .map(|cfg| wants_smdp.then(|| solve_point(cfg, spec.state_limit)))
        .collect();

    let mut cells = Vec::with_capacity(spec.cell_count());
    for (p, cfg) in configs.iter().enumerate() {
        for scaler in &spec.scalers {
            for &allocator in &spec.allocators {
                for &seed in &spec.seeds {
                    cells.push((p, cfg, *scaler, allocator, seed));
                }
            }
        }
    }

    let results: Vec<std::result::Result<SweepRow, SkippedCell>> = cells
        .par_iter()
        .map(|&(p, cfg, scaler, allocator, seed)| {
            let lambda = cfg.mean_arrival_rate();
            let skip = |reason: String| SkippedCell {
                scenario: spec.scenario.clone(),
                scaler: scaler.name().into(),
                allocator,
                threshold: scaler.threshold(),
                lambda,
                seed,
                reason,
            };
            let mut boxed: Box<dyn Scaler> = match scaler {
                ScalerSpec::Smdp => match tables[p].as_ref().expect("solved when smdp is requested") {
                    Ok(table) => Box::new(SmdpScaler::new(table.clone())),
                    Err(reason) => return Err(skip(reason.clone())),
                },
                ScalerSpec::Monitoring { threshold } => Box::new(MonitoringScaler::new(threshold)),
                ScalerSpec::Random => Box::new(RandomScaler::new(seed)),
            };
            let mut sim = SimConfig::new(cfg.clone(), spec.horizon_events, seed);
            sim.allocator = allocator;
            if let Some(w) = spec.warmup_events {
                sim.warmup_events = w;
            }
            let m = run(&sim, boxed.as_mut()).map_err(|e| skip(e.to_string()))?;
            let avg_delay = m.avg_delay.ok_or_else(|| skip("no completed requests after warmup".into()))?;
            Ok(SweepRow {
                scenario: spec.scenario.clone(),
                scaler: scaler.name().into(),
                allocator,
                threshold: scaler.threshold(),
                lambda,
                seed,
                avg_delay,
                avg_replicas: m.avg_replicas,
                throughput: m.throughput,
                total_reward: m.total_reward,
            })
        })
        .collect();

    let mut out = SweepOutcome::default();
    for r in results {
        match r {
            Ok(row) => out.rows.push(row),
            Err(cell) => out.skipped.push(cell),
        }
    }
    Ok(out)
}

/// Mean and 95% half-width of one metric over the seeds of a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Student-t half-width; `None` for a single seed.
    pub ci95: Option<f64>,
}

impl Estimate {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Estimate { mean, ci95: None };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        Estimate {
            mean,
            ci95: Some(t * (var / n as f64).sqrt()),
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        let h = self.ci95.unwrap_or(0.0);
        (self.mean - h, self.mean + h)
    }

    /// Whether the two 95% intervals share a point.
    pub fn overlaps(&self, other: &Estimate) -> bool {
        let (a, b) = self.interval();
        let (c, d) = other.interval();
        a <= d && c <= b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub scenario: String,
    pub scaler: String,
    pub allocator: Allocator,
    pub threshold: Option<f64>,
    pub lambda: f64,
    pub seeds: usize,
    pub avg_delay: Estimate,
    pub avg_replicas: Estimate,
    pub throughput: Estimate,
    pub total_reward: Estimate,
}

/// Groups rows by cell (everything but the seed), in first-seen order.
pub fn aggregate(rows: &[SweepRow]) -> Vec<AggregateRow> {
    type Key = (String, String, Allocator, Option<u64>, u64);
    let key = |r: &SweepRow| -> Key {
        (
            r.scenario.clone(),
            r.scaler.clone(),
            r.allocator,
            r.threshold.map(f64::to_bits),
            r.lambda.to_bits(),
        )
    };
    let mut order: Vec<Key> = Vec::new();
    let mut groups: HashMap<Key, Vec<&SweepRow>> = HashMap::new();
    for r in rows {
        let k = key(r);
        groups
            .entry(k.clone())
            .or_insert_with(|| {
                order.push(k);
                Vec::new()
            })
            .push(r);
    }
    order
        .iter()
        .map(|k| {
            let g = &groups[k];
            let pick = |f: fn(&SweepRow) -> f64| Estimate::of(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
            AggregateRow {
                scenario: g[0].scenario.clone(),
                scaler: g[0].scaler.clone(),
                allocator: g[0].allocator,
                threshold: g[0].threshold,
                lambda: g[0].lambda,
                seeds: g.len(),
                avg_delay: pick(|r| r.avg_delay),
                avg_replicas: pick(|r| r.avg_replicas),
                throughput: pick(|r| r.throughput),
                total_reward: pick(|r| r.total_reward),
            }
        })
        .collect()
}

fn create(path: &Path) -> Result<std::fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Per-run table: the fixed header, then one line per row.
pub fn write_rows(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    w.write_record(ROW_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<SweepRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ROW_HEADER {
        return Err(Error::parse(path, 1, format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::parse(path, i + 2, e.to_string())))
        .collect()
}

/// Per-cell table with `_mean` and `_ci95` columns; the half-width is empty
/// for single-seed cells.
pub fn write_aggregate(path: impl AsRef<Path>, rows: &[AggregateRow]) -> Result<()> {
    use std::io::Write as _;
    let path = path.as_ref();
    let mut file = create(path)?;
    writeln!(file, "{LAMBDA_NOTE}").map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["scenario", "scaler", "allocator", "threshold", "lambda", "seeds"];
    let metrics = ["avg_delay", "avg_replicas", "throughput", "total_reward"];
    let names: Vec<String> = metrics
        .iter()
        .flat_map(|m| [format!("{m}_mean"), format!("{m}_ci95")])
        .collect();
    header.extend(names.iter().map(String::as_str));
    w.write_record(&header)?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for r in rows {
        let mut rec = vec![
            r.scenario.clone(),
            r.scaler.clone(),
            r.allocator.to_string(),
            opt(r.threshold),
            r.lambda.to_string(),
            r.seeds.to_string(),
        ];
        for e in [r.avg_delay, r.avg_replicas, r.throughput, r.total_reward] {
            rec.push(e.mean.to_string());
            rec.push(opt(e.ci95));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_skipped(path: impl AsRef<Path>, cells: &[SkippedCell]) -> Result<()> {
    use std::io::Write as _;
    let path = path.as_ref();
    let mut file = create(path)?;
    writeln!(file, "{LAMBDA_NOTE}").map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(["scenario", "scaler", "allocator", "threshold", "lambda", "seed", "reason"])?;
    for c in cells {
        w.serialize(c)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `rows.csv`, `aggregate.csv` and `skipped.csv` into `dir`.
pub fn emit(dir: impl AsRef<Path>, outcome: &SweepOutcome) -> Result<()> {
    let dir = dir.as_ref();
    write_rows(dir.join("rows.csv"), &outcome.rows)?;
    write_aggregate(dir.join("aggregate.csv"), &aggregate(&outcome.rows))?;
    write_skipped(dir.join("skipped.csv"), &outcome.skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tiny_config;
    use approx::assert_abs_diff_eq;

    fn row(seed: u64, delay: f64) -> SweepRow {
        SweepRow {
            scenario: "t".into(),
            scaler: "rf".into(),
            allocator: Allocator::FirstFit,
            threshold: None,
            lambda: 2.0,
            seed,
            avg_delay: delay,
            avg_replicas: 1.5,
            throughput: 2.0,
            total_reward: -0.25,
        }
    }

    fn small_spec() -> SweepSpec {
        let mut spec = SweepSpec::new("tiny", tiny_config());
        spec.points = vec![SweepPoint::Scale(0.5), SweepPoint::Scale(0.75), SweepPoint::Scale(1.0)];
        spec.scalers = vec![ScalerSpec::Monitoring { threshold: 0.1 }, ScalerSpec::Random];
        spec.seeds = vec![1, 2];
        spec.horizon_events = 2_000;
        spec
    }

    #[test]
    fn product_count_and_determinism() {
        let spec = small_spec();
        let a = run_sweep(&spec).unwrap();
        assert_eq!(a.rows.len(), 12);
        assert!(a.skipped.is_empty());
        assert_eq!(a, run_sweep(&spec).unwrap());
        assert_eq!(a.rows[0].scaler, "mnt");
        assert_eq!(a.rows[0].threshold, Some(0.1));
        assert_eq!(a.rows[11].seed, 2);
        assert_abs_diff_eq!(a.rows[11].lambda, 2.0);
    }

    #[test]
    fn oversized_smdp_cells_are_skipped() {
        let mut spec = small_spec();
        spec.points = vec![SweepPoint::Scale(1.0)];
        spec.scalers = vec![ScalerSpec::Smdp, ScalerSpec::Random];
        spec.state_limit = 10;
        let out = run_sweep(&spec).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert_eq!(out.skipped.len(), 2);
        assert!(out.skipped[0].reason.contains("state space too large"));
        spec.state_limit = DEFAULT_STATE_LIMIT;
        // with a free replica the optimal policy serves; with unit cost 1 it never scales up
        spec.base.unit_cost = 0.0;
        let full = run_sweep(&spec).unwrap();
        assert!(full.skipped.is_empty(), "{:?}", full.skipped);
        assert_eq!(full.rows.len(), 4);
    }

    #[test]
    fn aggregate_examples() {
        let single = aggregate(&[row(1, 1.0)]);
        assert_eq!(single[0].avg_delay, Estimate { mean: 1.0, ci95: None });
        let same = aggregate(&[row(1, 1.0), row(2, 1.0)]);
        assert_eq!(same[0].avg_delay.ci95, Some(0.0));
        let three = aggregate(&[row(1, 1.0), row(2, 2.0), row(3, 3.0)]);
        assert_eq!(three.len(), 1);
        assert_abs_diff_eq!(three[0].avg_delay.mean, 2.0);
        // t(0.975, 2) = 4.302653, sd = 1
        assert_abs_diff_eq!(three[0].avg_delay.ci95.unwrap(), 4.302653 / 3f64.sqrt(), epsilon = 1e-5);
    }

    #[test]
    fn emitted_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        write_rows(&empty, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&empty).unwrap().lines().count(), 1);
        assert!(read_rows(&empty).unwrap().is_empty());

        let rows = run_sweep(&small_spec()).unwrap().rows;
        let path = dir.path().join("rows.csv");
        write_rows(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 13);
        assert_eq!(text.lines().next().unwrap(), ROW_HEADER.join(","));
        assert_eq!(read_rows(&path).unwrap(), rows);

        let out = SweepOutcome { rows, skipped: vec![] };
        emit(dir.path().join("run"), &out).unwrap();
        let agg = std::fs::read_to_string(dir.path().join("run/aggregate.csv")).unwrap();
        assert!(agg.starts_with(LAMBDA_NOTE));
        assert!(agg.lines().nth(1).unwrap().contains("avg_delay_mean,avg_delay_ci95"));
        assert_eq!(agg.lines().count(), 2 + 6);
        let first = std::fs::read(dir.path().join("run/rows.csv")).unwrap();
        emit(dir.path().join("run"), &out).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("run/rows.csv")).unwrap());
    }

    #[test]
    fn scaler_spec_parsing() {
        assert_eq!("smdp".parse::<ScalerSpec>().unwrap(), ScalerSpec::Smdp);
        assert_eq!(
            "mnt@0.05".parse::<ScalerSpec>().unwrap(),
            ScalerSpec::Monitoring { threshold: 0.05 }
        );
        assert_eq!(ScalerSpec::Monitoring { threshold: 0.5 }.to_string(), "mnt@0.5");
        assert!("mnt".parse::<ScalerSpec>().is_err());
        assert!("best".parse::<ScalerSpec>().is_err());
    }

    #[test]
    fn empty_grid_is_refused() {
        let mut spec = small_spec();
        spec.seeds.clear();
        assert!(run_sweep(&spec).is_err());
    }
}
