//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors
//! (unknown or malformed flags, out-of-range values, invalid configs).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use qrouting_core::curve::STEADY_STATE_SHARE;
use qrouting_core::engine::{Simulation, TopologyEvent};
use qrouting_core::{PolicyKind, RoutingPolicy, SimConfig, TieBreak, Traffic};

use crate::experiment::{
    self, default_seeds, run_comparison_on, run_load_sweep, settling_verdict, ExperimentSpec,
    Manifest, SETTLING_FRACTION,
};
use crate::topology_io::{self, describe, TopologySource};
use crate::{output, HarnessError};

/// Medium load used by `reproduce-fig3`.
pub const FIG3_LOAD: f64 = 2.15;
/// High load used by `reproduce-fig4`.
pub const FIG4_LOAD: f64 = 2.75;

#[derive(Debug, Parser)]
#[command(
    name = "qrouting",
    version,
    about = "Adaptive packet-routing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write its step metrics and deliveries.
    Simulate(SimulateArgs),
    /// Compare policies over several seeds.
    Compare(CompareArgs),
    /// Steady-state delivery time per policy and load.
    Sweep(SweepArgs),
    /// Q-Routing vs CQ-Routing learning at medium load (2.15 packets/step).
    #[command(name = "reproduce-fig3")]
    ReproduceFig3(ReproduceArgs),
    /// Q-Routing vs CQ-Routing learning at high load (2.75 packets/step).
    #[command(name = "reproduce-fig4")]
    ReproduceFig4(ReproduceArgs),
    /// Check a topology file: counts, connectivity, cut property.
    #[command(name = "topology-validate")]
    TopologyValidate { path: PathBuf },
    /// Write a built-in topology in the text format.
    #[command(name = "topology-emit")]
    TopologyEmit {
        #[arg(long, default_value = "grid6x6")]
        name: String,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a simulation and dump the final per-node tables as CSV.
    #[command(name = "dump-tables")]
    DumpTables(SimulateArgs),
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

fn positive_u64(s: &str) -> Result<u64, String> {
    match s.parse::<u64>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("`{s}` is not a positive integer")),
    }
}

fn eta_value(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v <= 1.0 => Ok(v),
        _ => Err(format!("`{s}` is not in (0, 1]")),
    }
}

fn lambda_value(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("`{s}` is not in (0, 1)")),
    }
}

fn policy_value(s: &str) -> Result<PolicyKind, String> {
    s.parse()
        .map_err(|e: qrouting_core::PolicyError| e.to_string())
}

fn tie_break_value(s: &str) -> Result<TieBreak, String> {
    match s {
        "first" => Ok(TieBreak::First),
        "random" => Ok(TieBreak::Random),
        _ => Err(format!("`{s}` is not `first` or `random`")),
    }
}

fn traffic_value(s: &str) -> Result<Traffic, String> {
    match s {
        "bernoulli" => Ok(Traffic::Bernoulli),
        "poisson" => Ok(Traffic::Poisson),
        _ => Err(format!("`{s}` is not `bernoulli` or `poisson`")),
    }
}

/// Flags shared by every command that runs simulations. Unset flags fall
/// back to `--config`, then to the built-in defaults.
#[derive(Debug, Args, Default)]
struct RunArgs {
    /// JSON experiment config; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in topology name or topology file.
    #[arg(long)]
    topology: Option<String>,
    #[arg(long, value_parser = positive_f64)]
    load: Option<f64>,
    #[arg(long, value_parser = positive_u64)]
    steps: Option<u64>,
    #[arg(long, value_parser = eta_value)]
    eta: Option<f64>,
    #[arg(long, value_parser = lambda_value)]
    lambda: Option<f64>,
    /// Metrics window in steps.
    #[arg(long, value_parser = positive_u64)]
    window: Option<u64>,
    #[arg(long, value_parser = tie_break_value)]
    tie_break: Option<TieBreak>,
    #[arg(long, value_parser = traffic_value)]
    traffic: Option<Traffic>,
    /// JSON list of link events: [{"step":..,"change":"link_down","u":..,"v":..}].
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_parser = policy_value)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path prefix (simulate) or CSV file (dump-tables).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SeedArgs {
    /// Number of seeds, 1..=N.
    #[arg(long, value_parser = positive_u64, conflicts_with = "seed_list")]
    seeds: Option<u64>,
    /// Explicit comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    seeds: SeedArgs,
    /// Comma-separated policies.
    #[arg(long, value_delimiter = ',', value_parser = policy_value)]
    policies: Option<Vec<PolicyKind>>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    seeds: SeedArgs,
    #[arg(long, value_delimiter = ',', value_parser = policy_value)]
    policies: Option<Vec<PolicyKind>>,
    /// Comma-separated loads.
    #[arg(long, value_delimiter = ',', value_parser = positive_f64)]
    loads: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(long, value_parser = positive_u64, default_value_t = 10)]
    seeds: u64,
    /// Output directory; defaults to `fig3` / `fig4`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = positive_u64, default_value_t = 30_000)]
    steps: u64,
    /// Overrides the figure's load (e.g. 2.7 for the high-load variant).
    #[arg(long, value_parser = positive_f64)]
    load: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] HarnessError),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

/// Config-level problems are usage errors, everything else is a runtime
/// failure.
fn classify(e: HarnessError) -> CliError {
    match e {
        HarnessError::Config(m) => CliError::Usage(m),
        HarnessError::Engine(qrouting_core::EngineError::Config(m)) => CliError::Usage(m.into()),
        HarnessError::Json(e) => CliError::Usage(format!("invalid config: {e}")),
        other => CliError::Runtime(other),
    }
}

impl RunArgs {
    /// Builds the experiment spec: defaults, then `--config`, then flags.
    fn spec(&self) -> Result<ExperimentSpec, CliError> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::from_json_file(path).map_err(classify)?,
            None => ExperimentSpec::default(),
        };
        if let Some(t) = &self.topology {
            spec.topology = TopologySource::from_arg(t);
        }
        let base = &mut spec.base;
        if let Some(v) = self.load {
            base.load = v;
        }
        if let Some(v) = self.steps {
            base.steps = v;
        }
        if let Some(v) = self.eta {
            base.params.eta = v;
        }
        if let Some(v) = self.lambda {
            base.params.lambda = v;
        }
        if let Some(v) = self.window {
            base.metrics_window = v;
        }
        if let Some(v) = self.tie_break {
            base.params.tie_break = v;
        }
        if let Some(v) = self.traffic {
            base.traffic = v;
        }
        if let Some(path) = &self.events {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Runtime(HarnessError::io(path, e)))?;
            let events: Vec<TopologyEvent> = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            base.events = events;
        }
        Ok(spec)
    }
}

impl SeedArgs {
    fn apply(&self, spec: &mut ExperimentSpec) {
        if let Some(list) = &self.seed_list {
            spec.seeds = list.clone();
        } else if let Some(n) = self.seeds {
            spec.seeds = default_seeds(n as usize);
        }
    }
}

fn simulate_config(args: &SimulateArgs) -> Result<(ExperimentSpec, SimConfig), CliError> {
    let spec = args.run.spec()?;
    let mut cfg = spec.base.clone();
    if let Some(p) = args.policy {
        cfg.policy = p;
    } else if args.run.config.is_some() {
        cfg.policy = spec.policies.first().copied().unwrap_or(cfg.policy);
    }
    cfg.seed = args
        .seed
        .or_else(|| {
            args.run
                .config
                .as_ref()
                .and_then(|_| spec.seeds.first().copied())
        })
        .unwrap_or(cfg.seed);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((spec, cfg))
}

fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let (spec, cfg) = simulate_config(args)?;
    let topology = spec.topology.load().map_err(classify)?;
    let out = qrouting_core::run(&topology, &cfg).map_err(|e| classify(e.into()))?;
    ensure_parent(&args.out)?;
    let curve_path = prefixed(&args.out, "_curve.csv");
    let deliveries_path = prefixed(&args.out, "_deliveries.csv");
    output::write_step_metrics(&curve_path, &out.reports)?;
    output::write_deliveries(&deliveries_path, &out.records)?;
    let steady = qrouting_core::curve::steady_state_mean(
        out.records
            .iter()
            .map(|r| (r.delivered_at, r.delivery_time)),
        cfg.steps,
        STEADY_STATE_SHARE,
    );
    let last = out.reports.last();
    println!(
        "{} load {} seed {}: delivered {}, in flight {}, steady-state mean delivery time {}",
        cfg.policy,
        cfg.load,
        cfg.seed,
        out.records.len(),
        last.map_or(0, |r| r.in_flight),
        steady.map_or("n/a".to_string(), |m| format!("{m:.3}"))
    );
    println!("wrote {}", curve_path.display());
    println!("wrote {}", deliveries_path.display());
    Ok(())
}

fn dump_tables(args: &SimulateArgs) -> Result<(), CliError> {
    let (spec, cfg) = simulate_config(args)?;
    let topology = spec.topology.load().map_err(classify)?;
    let mut sim = Simulation::new(topology, &cfg).map_err(|e| classify(e.into()))?;
    for _ in 0..cfg.steps {
        sim.step().map_err(HarnessError::from)?;
    }
    ensure_parent(&args.out)?;
    output::write_tables(&args.out, &sim.policy().dump())?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<(), CliError> {
    let mut spec = args.run.spec()?;
    args.seeds.apply(&mut spec);
    if let Some(p) = &args.policies {
        spec.policies = p.clone();
    }
    spec.validate().map_err(classify)?;
    let topology = spec.topology.load().map_err(classify)?;
    let comparison = run_comparison_on(&spec, &topology)?;
    for path in comparison.write(&args.out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let mut spec = args.run.spec()?;
    args.seeds.apply(&mut spec);
    if let Some(p) = &args.policies {
        spec.policies = p.clone();
    } else if args.run.config.is_none() {
        spec.policies = vec![PolicyKind::ShortestPath, PolicyKind::QRouting];
    }
    if let Some(l) = &args.loads {
        spec.loads = l.clone();
    } else if spec.loads.is_empty() {
        spec.loads = vec![0.5, 1.0, 2.15, 2.75];
    }
    spec.validate().map_err(classify)?;
    let topology = spec.topology.load().map_err(classify)?;
    let rows = run_load_sweep(&spec, &topology).map_err(classify)?;
    fs::create_dir_all(&args.out).map_err(|e| HarnessError::io(&args.out, e))?;
    let path = args.out.join("sweep.csv");
    experiment::write_sweep(&path, &rows)?;
    let manifest = Manifest::new("sweep", &spec).write(&args.out)?;
    for r in &rows {
        println!("{} load {}: mean {:.3}", r.policy, r.load, r.mean);
    }
    println!("wrote {}", path.display());
    println!("wrote {}", manifest.display());
    Ok(())
}

fn reproduce(args: &ReproduceArgs, name: &str, load: f64) -> Result<(), CliError> {
    let spec = ExperimentSpec {
        topology: TopologySource::default(),
        base: SimConfig {
            load: args.load.unwrap_or(load),
            steps: args.steps,
            ..SimConfig::default()
        },
        seeds: default_seeds(args.seeds as usize),
        policies: vec![PolicyKind::QRouting, PolicyKind::CqRouting],
        loads: Vec::new(),
    };
    let topology = spec.topology.load().map_err(classify)?;
    let comparison = run_comparison_on(&spec, &topology)?;
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from(name));
    let mut written = comparison.write(&out_dir)?;
    let verdict = settling_verdict(
        &comparison,
        PolicyKind::CqRouting,
        PolicyKind::QRouting,
        SETTLING_FRACTION,
    )?;
    let lines = verdict.lines();
    let verdict_path = out_dir.join("verdict.txt");
    let mut text = lines.join("\n");
    text.push('\n');
    fs::write(&verdict_path, text).map_err(|e| HarnessError::io(&verdict_path, e))?;
    written.push(verdict_path);
    for line in &lines {
        println!("{line}");
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn topology_validate(path: &Path) -> Result<(), CliError> {
    let t = topology_io::load_topology(path)?;
    println!("{}", describe(&t));
    Ok(())
}

fn topology_emit(name: &str, out: Option<&Path>) -> Result<(), CliError> {
    let t = topology_io::builtin(name).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown topology `{name}`; known: {}",
            topology_io::BUILTIN_NAMES.join(", ")
        ))
    })?;
    match out {
        Some(path) => {
            ensure_parent(path)?;
            topology_io::save_topology(&t, path)?;
            println!("wrote {}", path.display());
        }
        None => print!("{}", t.to_text()),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::DumpTables(a) => dump_tables(a),
        Command::Compare(a) => compare(a),
        Command::Sweep(a) => sweep(a),
        Command::ReproduceFig3(a) => reproduce(a, "fig3", FIG3_LOAD),
        Command::ReproduceFig4(a) => reproduce(a, "fig4", FIG4_LOAD),
        Command::TopologyValidate { path } => topology_validate(path),
        Command::TopologyEmit { name, out } => topology_emit(name, out.as_deref()),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
