//! Command-line front end. Exit codes: 0 success, 1 usage or runtime error,
//! 2 capacity or overflow refusal, 3 failed `verify` check.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{state_space_size, CountFormula, ScalingConfig, StateSpace, DEFAULT_STATE_LIMIT};
use crate::oracle;
use crate::presets;
use crate::reporting::{self, ScalerSpec, SweepPoint, SweepSpec};
use crate::scalers::{MonitoringScaler, PinnedScaler, PolicyTable, RandomScaler, Scaler, SmdpScaler};
use crate::simulator::{Allocator, ReplicaSampling, RunMetrics, SimConfig, Simulation};
use crate::solver::{self, complexity_bounds, read_policy, uniformize, write_policy, PolicyFile, ValueIteration};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_REFUSAL: u8 = 2;
pub const EXIT_VERIFY_FAILED: u8 = 3;

const DEFAULT_SCALES: &str = "0.5,1,1.5,2,2.5,3";

#[derive(Debug, Parser)]
#[command(name = "edgescale", version, about = "Optimal and heuristic function scaling on edge clusters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the scaling SMDP and write the optimal policy.
    Solve(SolveArgs),
    /// Run one simulation and report its metrics.
    Simulate(SimulateArgs),
    /// Run a grid of simulations over arrival-rate points.
    Sweep(SweepArgs),
    /// Report state-space sizes and solver complexity bounds.
    Statespace(StatespaceArgs),
    /// Sweep the canonical grid: smdp, mnt at each threshold and rf, under both allocators.
    Compare(CompareArgs),
    /// Run the oracle checks on tiny instances.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Preset name (tiny, small, large, small-reduced) or TOML path.
    #[arg(long)]
    config: String,
    /// Override a configuration field; vectors take comma-separated values.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ScalingConfig> {
        let mut cfg = presets::resolve(&self.config)?;
        let pairs = self
            .set
            .iter()
            .map(|pair| {
                pair.split_once('=')
                    .map(|(k, v)| (k.trim(), v))
                    .ok_or_else(|| Error::InvalidConfig(format!("override `{pair}` is not KEY=VALUE")))
            })
            .collect::<Result<Vec<_>>>()?;
        cfg.apply_overrides(&pairs)?;
        Ok(cfg)
    }

    /// Preset name, or the file stem of a path.
    fn scenario(&self) -> String {
        Path::new(&self.config)
            .file_stem()
            .map_or_else(|| self.config.clone(), |s| s.to_string_lossy().into_owned())
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value = "policy.txt")]
    out: PathBuf,
    /// Refuse state spaces larger than this.
    #[arg(long, default_value_t = DEFAULT_STATE_LIMIT)]
    state_limit: u128,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// smdp, mnt, rf or pinned.
    #[arg(long, default_value = "mnt")]
    scaler: String,
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    /// Policy file written by `solve`; required for smdp.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Replicas per class for the pinned scaler, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pin: Vec<u32>,
    #[arg(long, default_value = "ffa")]
    allocator: Allocator,
    /// Events simulated, warmup included.
    #[arg(long, default_value_t = 100_000)]
    horizon: u64,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Sliding window of the load estimator, in time units.
    #[arg(long)]
    window: Option<f64>,
    /// Average replicas over events instead of over time.
    #[arg(long)]
    event_sampled: bool,
    /// Check cluster invariants after every event.
    #[arg(long)]
    debug_checks: bool,
    /// Write one line per event here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Metrics file; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Arrival-rate multipliers applied to the configuration.
    #[arg(long, value_delimiter = ',', default_value = DEFAULT_SCALES)]
    scale: Vec<f64>,
    /// Number of seeds per cell, counted up from --seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    horizon: u64,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_STATE_LIMIT)]
    state_limit: u128,
    /// Directory receiving rows.csv, aggregate.csv and skipped.csv.
    #[arg(long, default_value = "sweep-out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// smdp, rf or mnt@<threshold>, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "rf")]
    scaler: Vec<ScalerSpec>,
    /// Adds mnt@<t> for every listed threshold.
    #[arg(long, value_delimiter = ',')]
    threshold: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "ffa")]
    allocator: Vec<Allocator>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Monitoring thresholds; defaults depend on the preset.
    #[arg(long, value_delimiter = ',')]
    threshold: Vec<f64>,
}

#[derive(Debug, Args)]
struct StatespaceArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Discrete discount for the complexity bounds; defaults to the uniformized one.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Monte-Carlo paths for the discounting check.
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    /// Events per queueing check.
    #[arg(long, default_value_t = 200_000)]
    events: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Statespace(a) => statespace(a, out),
        Command::Compare(a) => compare(a, out),
        Command::Verify(a) => verify(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let Error::StateSpaceTooLarge { .. } = e {
                let _ = writeln!(err, "hint: reduce max_replicas, max_queue or the number of classes with --set");
            }
            if e.is_refusal() {
                EXIT_REFUSAL
            } else {
                EXIT_USAGE
            }
        }
    }
}

/// Entry point of the `edgescale` binary.
pub fn main() -> ExitCode {
    let code = run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn solve(a: SolveArgs, out: &mut dyn Write) -> Result<u8> {
    let cfg = a.config.load()?;
    let space = match StateSpace::enumerate_with_limit(&cfg, a.state_limit) {
        Ok(space) => space,
        Err(e @ Error::StateSpaceTooLarge { .. }) => {
            let w = &mut *out;
            let _ = writeln!(w, "refusing to solve: {e}");
            if let Ok(n) = state_space_size(&cfg, CountFormula::PaperFormula) {
                let _ = writeln!(w, "closed-form count M^K*Q_m^K*K*(N+1) = {n}");
            }
            let gamma = solver::uniformization_rate(&cfg) / (solver::uniformization_rate(&cfg) + cfg.discount);
            if let Ok(b) = complexity_bounds(&cfg, gamma) {
                let _ = writeln!(w, "time bound {:.6e}, space bound {:.6e} (gamma = {gamma:.6})", b.time, b.space);
            }
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let model = uniformize(&space)?;
    let policy = ValueIteration::new(cfg.epsilon).solve(&model)?;
    let file = PolicyFile::new(&space, &model, &policy);
    write_policy(&a.out, &file)?;
    let w = out;
    let wr = |w: &mut dyn Write, s: String| writeln!(w, "{s}").map_err(|e| Error::io("<stdout>", e));
    wr(w, format!("states {}", space.len()))?;
    wr(w, format!("rho {}", model.rho))?;
    wr(w, format!("lambda_bar {}", model.lambda_bar))?;
    wr(w, format!("iterations {}", policy.iterations))?;
    wr(w, format!("final_residual {:e}", policy.final_residual()))?;
    wr(w, format!("policy {}", a.out.display()))?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    scenario: String,
    scaler: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    allocator: String,
    seed: u64,
    horizon: u64,
    warmup: u64,
    overrides: &'a [String],
    config_hash: String,
    metrics: MetricsReport,
}

#[derive(Serialize)]
struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    avg_delay: Option<f64>,
    avg_replicas: f64,
    avg_replicas_per_class: Vec<f64>,
    completed: u64,
    throughput: f64,
    total_reward: f64,
    max_queue: u32,
    measured_time: f64,
    allocation_failures: u64,
    arrivals: u64,
    completions: u64,
    queued: u64,
    in_service: u64,
}

impl From<&RunMetrics> for MetricsReport {
    fn from(m: &RunMetrics) -> Self {
        Self {
            avg_delay: m.avg_delay,
            avg_replicas: m.avg_replicas,
            avg_replicas_per_class: m.avg_replicas_per_class.clone(),
            completed: m.completed,
            throughput: m.throughput,
            total_reward: m.total_reward,
            max_queue: m.max_queue,
            measured_time: m.measured_time,
            allocation_failures: m.allocation_failures,
            arrivals: m.conservation.arrivals,
            completions: m.conservation.completions,
            queued: m.conservation.queued,
            in_service: m.conservation.in_service,
        }
    }
}

fn load_table(path: Option<&Path>, cfg: &ScalingConfig) -> Result<PolicyTable> {
    let path = path.ok_or_else(|| {
        Error::InvalidConfig("the smdp scaler needs --policy; write one with `edgescale solve`".into())
    })?;
    if !path.exists() {
        return Err(Error::InvalidConfig(format!(
            "policy file {} not found; write it with `edgescale solve`",
            path.display()
        )));
    }
    let file = read_policy(path)?;
    if file.header.config_hash != cfg.fingerprint() {
        return Err(Error::InvalidConfig(format!(
            "policy {} was solved for configuration {}, not {}; rerun `edgescale solve`",
            path.display(),
            file.header.config_hash,
            cfg.fingerprint()
        )));
    }
    Ok(PolicyTable::from_file(&file))
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<u8> {
    let cfg = a.config.load()?;
    let mut scaler: Box<dyn Scaler> = match a.scaler.as_str() {
        "smdp" => Box::new(SmdpScaler::new(load_table(a.policy.as_deref(), &cfg)?)),
        "mnt" => Box::new(MonitoringScaler::new(a.threshold)),
        "rf" => Box::new(RandomScaler::new(a.seed)),
        "pinned" => {
            if a.pin.len() != cfg.n_classes {
                return Err(Error::InvalidConfig(format!(
                    "--pin needs {} counts, got {}",
                    cfg.n_classes,
                    a.pin.len()
                )));
            }
            Box::new(PinnedScaler::new(a.pin.clone()))
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown scaler `{other}` (expected smdp, mnt, rf or pinned)"
            )))
        }
    };
    let mut sim = SimConfig::new(cfg.clone(), a.horizon, a.seed);
    sim.allocator = a.allocator;
    if let Some(w) = a.warmup {
        sim.warmup_events = w;
    }
    if let Some(w) = a.window {
        sim.load_window = w;
    }
    if a.event_sampled {
        sim.replica_sampling = ReplicaSampling::EventSampled;
    }
    sim.debug_checks = a.debug_checks;
    let warmup = sim.warmup_events;

    let metrics = match &a.trace {
        Some(path) => {
            let mut trace = BufWriter::new(File::create(path).map_err(io_err(path))?);
            let m = Simulation::new(sim)?.with_trace(&mut trace).run(scaler.as_mut())?;
            trace.flush().map_err(io_err(path))?;
            m
        }
        None => Simulation::new(sim)?.run(scaler.as_mut())?,
    };

    let report = SimulateReport {
        scenario: a.config.scenario(),
        scaler: scaler.name().to_string(),
        threshold: scaler.threshold(),
        allocator: a.allocator.to_string(),
        seed: a.seed,
        horizon: a.horizon,
        warmup,
        overrides: &a.config.set,
        config_hash: cfg.fingerprint(),
        metrics: MetricsReport::from(&metrics),
    };
    let text = toml::to_string(&report).map_err(|e| Error::Internal(e.to_string()))?;
    match &a.out {
        Some(path) => std::fs::write(path, text).map_err(io_err(path))?,
        None => write!(out, "{text}").map_err(io_err(Path::new("<stdout>")))?,
    }
    Ok(EXIT_OK)
}

fn grid_spec(config: &ConfigArgs, grid: &GridArgs) -> Result<SweepSpec> {
    let mut spec = SweepSpec::new(config.scenario(), config.load()?);
    spec.points = grid.scale.iter().map(|&f| SweepPoint::Scale(f)).collect();
    spec.seeds = (grid.seed..grid.seed + grid.seeds).collect();
    spec.horizon_events = grid.horizon;
    spec.warmup_events = grid.warmup;
    spec.state_limit = grid.state_limit;
    Ok(spec)
}

fn run_grid(spec: &SweepSpec, dir: &Path, out: &mut dyn Write) -> Result<u8> {
    let outcome = reporting::run_sweep(spec)?;
    reporting::emit(dir, &outcome)?;
    let mut w = |s: String| writeln!(out, "{s}").map_err(io_err(Path::new("<stdout>")));
    w(format!(
        "{} rows, {} skipped cells written to {}",
        outcome.rows.len(),
        outcome.skipped.len(),
        dir.display()
    ))?;
    for cell in &outcome.skipped {
        w(format!(
            "skipped {} {} lambda={} seed={}: {}",
            cell.scaler, cell.allocator, cell.lambda, cell.seed, cell.reason
        ))?;
    }
    Ok(EXIT_OK)
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> Result<u8> {
    let mut spec = grid_spec(&a.config, &a.grid)?;
    spec.scalers = a.scaler.clone();
    spec.scalers
        .extend(a.threshold.iter().map(|&threshold| ScalerSpec::Monitoring { threshold }));
    spec.allocators = a.allocator.clone();
    run_grid(&spec, &a.grid.out, out)
}

/// Monitoring thresholds compared by default. The load estimate is per
/// replica, so the settings are scaled to the per-class offered load of each
/// preset: the large network keeps three settings below its lowest offered
/// load, the small ones two.
pub fn default_thresholds(config: &str) -> Vec<f64> {
    match config {
        "large" => vec![0.1, 0.05, 0.01],
        _ => vec![1.0, 0.5],
    }
}

fn compare(a: CompareArgs, out: &mut dyn Write) -> Result<u8> {
    let mut spec = grid_spec(&a.config, &a.grid)?;
    let thresholds = if a.threshold.is_empty() {
        default_thresholds(&a.config.config)
    } else {
        a.threshold.clone()
    };
    spec.scalers = std::iter::once(ScalerSpec::Smdp)
        .chain(thresholds.iter().map(|&threshold| ScalerSpec::Monitoring { threshold }))
        .chain(std::iter::once(ScalerSpec::Random))
        .collect();
    spec.allocators = vec![Allocator::FirstFit, Allocator::RandomFit];
    run_grid(&spec, &a.grid.out, out)
}

fn statespace(a: StatespaceArgs, out: &mut dyn Write) -> Result<u8> {
    let cfg = a.config.load()?;
    let mut lines = Vec::new();
    let mut refused = false;
    let paper = state_space_size(&cfg, CountFormula::PaperFormula);
    let exact = state_space_size(&cfg, CountFormula::ExactEnumeration);
    match &paper {
        Ok(n) => lines.push(format!("paper_formula {n}")),
        Err(e) => {
            refused |= e.is_refusal();
            lines.push(format!("paper_formula overflow ({e})"));
        }
    }
    match &exact {
        Ok(n) => lines.push(format!("exact_enumeration {n}")),
        Err(e) => {
            refused |= e.is_refusal();
            lines.push(format!("exact_enumeration overflow ({e})"));
        }
    }
    lines.push(
        "note: the closed form M^K*Q_m^K*K*(N+1) counts replica and queue levels 1..M and 1..Q_m, \
         ignores the CPU capacity and adds departures of classes without replicas; the exact count \
         uses levels 0..M and 0..Q_m, keeps only capacity-feasible replica vectors and has one \
         departure event per class with a replica"
            .into(),
    );
    let gamma = match a.gamma {
        Some(g) => g,
        None => {
            let rho = solver::uniformization_rate(&cfg);
            rho / (rho + cfg.discount)
        }
    };
    match complexity_bounds(&cfg, gamma) {
        Ok(b) => {
            lines.push(format!("gamma {gamma}"));
            lines.push(format!("time_bound {:e}", b.time));
            lines.push(format!("space_bound {:e}", b.space));
        }
        Err(e) => {
            refused |= e.is_refusal();
            lines.push(format!("bounds unavailable ({e})"));
        }
    }
    for l in lines {
        writeln!(out, "{l}").map_err(io_err(Path::new("<stdout>")))?;
    }
    Ok(if refused { EXIT_REFUSAL } else { EXIT_OK })
}

fn verify(a: VerifyArgs, out: &mut dyn Write) -> Result<u8> {
    let mut failed = 0;
    let mut report = |name: &str, ok: bool, detail: String| -> Result<()> {
        failed += usize::from(!ok);
        let tag = if ok { "PASS" } else { "FAIL" };
        writeln!(out, "{tag} {name}: {detail}").map_err(io_err(Path::new("<stdout>")))
    };

    let tiny = presets::tiny();
    let space = StateSpace::enumerate(&tiny)?;
    let model = uniformize(&space)?;
    let eps = 1e-10;
    let vi = ValueIteration::new(eps).solve(&model)?;
    let bf = oracle::brute_force_optimal(&model)?;
    let gap = vi
        .values
        .iter()
        .zip(&bf.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    report(
        "brute-force",
        gap <= eps + 1e-8 && vi.actions == bf.actions,
        format!("{} policies, max value gap {gap:.3e}", bf.policies_evaluated),
    )?;

    let start = space.initial_index();
    let mc = oracle::monte_carlo_value(&space, &vi.actions, start, 200.0 / tiny.discount, a.paths, a.seed)?;
    let dev = (mc.mean - vi.values[start]).abs();
    report(
        "monte-carlo",
        dev <= 3.0 * mc.stderr,
        format!("estimate {:.5} +- {:.5}, solver {:.5}", mc.mean, mc.stderr, vi.values[start]),
    )?;

    for (lambda, mu, servers) in [(0.5, 1.0, 1u32), (2.0, 1.0, 3)] {
        let truth = oracle::erlang_c_delay(lambda, mu, servers)?.mean_sojourn;
        let cfg = queue_config(lambda, mu, servers);
        let mut sim = SimConfig::new(cfg, a.events, a.seed);
        sim.transmission_delay = vec![0.0];
        let m = Simulation::new(sim)?.run(&mut PinnedScaler::new(vec![servers]))?;
        let d = m.avg_delay.unwrap_or(f64::NAN);
        report(
            &format!("M/M/{servers}"),
            (d - truth).abs() <= 0.05 * truth,
            format!("sojourn {d:.4}, expected {truth:.4}"),
        )?;
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

/// One class with `servers` unit-demand replicas on a single node.
pub fn queue_config(lambda: f64, mu: f64, servers: u32) -> ScalingConfig {
    ScalingConfig {
        capacity: vec![servers],
        arrival_rate: vec![lambda],
        service_rate: vec![mu],
        max_replicas: servers,
        ..presets::tiny()
    }
}
