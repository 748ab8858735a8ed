//! Multi-seed experiments: policy comparisons, load sweeps and the
//! learning-speed verdicts built on them.
//!
//! Seed runs are independent and execute in parallel. Results are always
//! collected in `(policy, seed)` order, so outputs do not depend on thread
//! scheduling.

use std::fs;
use std::path::{Path, PathBuf};

use qrouting_core::curve::{self, steady_state_mean, STEADY_STATE_SHARE};
use qrouting_core::{
    aggregate_curves, run, settling_step, LearningCurve, PolicyKind, RunOutput, SimConfig, Topology,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::output;
use crate::topology_io::TopologySource;
use crate::HarnessError;

/// Seeds used when none are given.
pub fn default_seeds(count: usize) -> Vec<u64> {
    (1..=count as u64).collect()
}

/// A set of runs sharing one base configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub topology: TopologySource,
    /// Base run configuration; its `seed` and `policy` are replaced per run.
    pub base: SimConfig,
    pub seeds: Vec<u64>,
    pub policies: Vec<PolicyKind>,
    /// Loads for sweeps; ignored by comparisons.
    pub loads: Vec<f64>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            topology: TopologySource::default(),
            base: SimConfig::default(),
            seeds: default_seeds(10),
            policies: vec![PolicyKind::QRouting, PolicyKind::CqRouting],
            loads: Vec::new(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(HarnessError::Config("seeds must be distinct".into()));
        }
        if self.policies.is_empty() {
            return Err(HarnessError::Config(
                "at least one policy is required".into(),
            ));
        }
        if self.loads.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(HarnessError::Config("loads must be positive".into()));
        }
        self.base.validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(&json))
    }

    fn config_for(&self, policy: PolicyKind, seed: u64, load: Option<f64>) -> SimConfig {
        SimConfig {
            policy,
            seed,
            load: load.unwrap_or(self.base.load),
            ..self.base.clone()
        }
    }
}

/// One finished `(policy, seed)` run.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub policy: PolicyKind,
    pub seed: u64,
    pub output: RunOutput,
}

impl SeedRun {
    pub fn steady_state_mean(&self, total_steps: u64) -> Option<f64> {
        steady_state_mean(
            self.output
                .records
                .iter()
                .map(|r| (r.delivered_at, r.delivery_time)),
            total_steps,
            STEADY_STATE_SHARE,
        )
    }
}

fn run_all(
    topology: &Topology,
    jobs: Vec<(PolicyKind, u64, SimConfig)>,
) -> Result<Vec<SeedRun>, HarnessError> {
    jobs.into_par_iter()
        .map(|(policy, seed, cfg)| {
            let output = run(topology, &cfg)?;
            Ok(SeedRun {
                policy,
                seed,
                output,
            })
        })
        .collect()
}

/// Aggregated and per-seed curves of one policy.
#[derive(Debug, Clone)]
pub struct PolicyCurves {
    pub policy: PolicyKind,
    pub runs: Vec<SeedRun>,
    pub aggregate: LearningCurve,
}

impl PolicyCurves {
    pub fn curve_for_seed(&self, seed: u64) -> Option<&LearningCurve> {
        self.runs
            .iter()
            .find(|r| r.seed == seed)
            .map(|r| &r.output.curve)
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub spec: ExperimentSpec,
    pub policies: Vec<PolicyCurves>,
}

/// Runs every `(policy, seed)` pair of `spec` and aggregates per policy.
pub fn run_comparison(spec: &ExperimentSpec) -> Result<Comparison, HarnessError> {
    spec.validate()?;
    let topology = spec.topology.load()?;
    run_comparison_on(spec, &topology)
}

/// [`run_comparison`] with an already loaded topology.
pub fn run_comparison_on(
    spec: &ExperimentSpec,
    topology: &Topology,
) -> Result<Comparison, HarnessError> {
    spec.validate()?;
    let jobs = spec
        .policies
        .iter()
        .flat_map(|&p| {
            spec.seeds
                .iter()
                .map(move |&s| (p, s, spec.config_for(p, s, None)))
        })
        .collect();
    let mut runs = run_all(topology, jobs)?.into_iter();
    let mut policies = Vec::new();
    for &policy in &spec.policies {
        let runs: Vec<SeedRun> = runs.by_ref().take(spec.seeds.len()).collect();
        let curves: Vec<LearningCurve> = runs.iter().map(|r| r.output.curve.clone()).collect();
        let aggregate = aggregate_curves(&curves)?;
        policies.push(PolicyCurves {
            policy,
            runs,
            aggregate,
        });
    }
    Ok(Comparison {
        spec: spec.clone(),
        policies,
    })
}

impl Comparison {
    pub fn get(&self, policy: PolicyKind) -> Option<&PolicyCurves> {
        self.policies.iter().find(|p| p.policy == policy)
    }

    /// Writes one curve CSV per policy plus `comparison.csv` and
    /// `manifest.json` into `dir`; returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let mut written = Vec::new();
        for p in &self.policies {
            let path = dir.join(format!("curve_{}.csv", p.policy.name()));
            output::write_curve(&path, &p.aggregate)?;
            written.push(path);
        }
        let path = dir.join("comparison.csv");
        let pairs: Vec<(PolicyKind, &LearningCurve)> = self
            .policies
            .iter()
            .map(|p| (p.policy, &p.aggregate))
            .collect();
        output::write_comparison(&path, &pairs)?;
        written.push(path);
        written.push(Manifest::new("compare", &self.spec).write(dir)?);
        Ok(written)
    }
}

/// Steady-state result of one policy at one load.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub policy: PolicyKind,
    pub load: f64,
    /// Mean over seeds of the per-seed steady-state mean delivery time.
    pub mean: f64,
    /// Standard error over seeds; undefined for a single seed.
    pub stderr: Option<f64>,
    #[serde(skip)]
    pub per_seed: Vec<f64>,
}

fn mean_and_stderr(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// Steady-state mean delivery time for every `(policy, load)` pair,
/// aggregated over `spec.seeds`. Rows are ordered by policy, then load.
pub fn run_load_sweep(
    spec: &ExperimentSpec,
    topology: &Topology,
) -> Result<Vec<SweepRow>, HarnessError> {
    spec.validate()?;
    if spec.loads.is_empty() {
        return Err(HarnessError::Config(
            "a sweep needs at least one load".into(),
        ));
    }
    let mut jobs = Vec::new();
    for &p in &spec.policies {
        for &load in &spec.loads {
            for &s in &spec.seeds {
                jobs.push((p, s, spec.config_for(p, s, Some(load))));
            }
        }
    }
    let runs = run_all(topology, jobs)?;
    let steps = spec.base.steps;
    let mut rows = Vec::new();
    let mut chunks = runs.chunks(spec.seeds.len());
    for &policy in &spec.policies {
        for &load in &spec.loads {
            let chunk = chunks.next().expect("one chunk per (policy, load)");
            let per_seed: Vec<f64> = chunk
                .iter()
                .map(|r| {
                    r.steady_state_mean(steps).ok_or_else(|| {
                        HarnessError::Config(format!(
                            "{policy} at load {load} seed {}: no deliveries in steady state",
                            r.seed
                        ))
                    })
                })
                .collect::<Result<_, _>>()?;
            let (mean, stderr) = mean_and_stderr(&per_seed);
            rows.push(SweepRow {
                policy,
                load,
                mean,
                stderr,
                per_seed,
            });
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct SweepCsvRow {
    policy: &'static str,
    load: f64,
    mean: f64,
    stderr: Option<f64>,
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<(), HarnessError> {
    output::write_rows(
        path,
        rows.iter().map(|r| SweepCsvRow {
            policy: r.policy.name(),
            load: r.load,
            mean: r.mean,
            stderr: r.stderr,
        }),
    )
}

/// Settling steps of two policies on one seed; `None` means not settled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairedSettling {
    pub seed: u64,
    pub candidate: Option<u64>,
    pub baseline: Option<u64>,
}

impl PairedSettling {
    /// True iff the candidate settled strictly earlier. Not settling counts
    /// as later than any step.
    pub fn candidate_earlier(&self) -> bool {
        match (self.candidate, self.baseline) {
            (Some(c), Some(b)) => c < b,
            (Some(_), None) => true,
            (None, _) => false,
        }
    }
}

/// Learning-speed comparison of `candidate` against `baseline`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SettlingVerdict {
    pub candidate: PolicyKind,
    pub baseline: PolicyKind,
    pub pairs: Vec<PairedSettling>,
    /// Settling of the aggregated curves; only present with two or more seeds.
    pub aggregate: Option<(Option<u64>, Option<u64>)>,
}

impl SettlingVerdict {
    pub fn earlier_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.candidate_earlier()).count()
    }

    /// Aggregated candidate curve settles no later than the baseline's.
    pub fn aggregate_no_later(&self) -> Option<bool> {
        self.aggregate.map(|(c, b)| match (c, b) {
            (Some(c), Some(b)) => c <= b,
            (Some(_), None) => true,
            (None, _) => false,
        })
    }

    /// Human-readable verdict, one line per seed plus the aggregate line.
    pub fn lines(&self) -> Vec<String> {
        let show = |s: Option<u64>| s.map_or("not settled".to_string(), |v| v.to_string());
        let (c, b) = (self.candidate.name(), self.baseline.name());
        let mut out: Vec<String> = self
            .pairs
            .iter()
            .map(|p| {
                let verdict = if p.candidate_earlier() {
                    format!("{c} settles earlier")
                } else {
                    format!("{c} does not settle earlier")
                };
                format!(
                    "seed {}: {c} {}, {b} {} -> {verdict}",
                    p.seed,
                    show(p.candidate),
                    show(p.baseline)
                )
            })
            .collect();
        if let (Some((ac, ab)), Some(ok)) = (self.aggregate, self.aggregate_no_later()) {
            out.push(format!(
                "aggregate: {c} {}, {b} {} -> {}; {c} earlier in {}/{} paired seeds",
                show(ac),
                show(ab),
                if ok {
                    format!("{c} settles no later")
                } else {
                    format!("{c} settles later")
                },
                self.earlier_count(),
                self.pairs.len()
            ));
        }
        out
    }
}

pub fn settling_verdict(
    comparison: &Comparison,
    candidate: PolicyKind,
    baseline: PolicyKind,
    fraction: f64,
) -> Result<SettlingVerdict, HarnessError> {
    let missing = |p: PolicyKind| HarnessError::Config(format!("comparison lacks policy {p}"));
    let cand = comparison
        .get(candidate)
        .ok_or_else(|| missing(candidate))?;
    let base = comparison.get(baseline).ok_or_else(|| missing(baseline))?;
    let settle = |c: &LearningCurve| settling_step(c, fraction).ok();
    let pairs = comparison
        .spec
        .seeds
        .iter()
        .map(|&seed| PairedSettling {
            seed,
            candidate: cand.curve_for_seed(seed).and_then(settle),
            baseline: base.curve_for_seed(seed).and_then(settle),
        })
        .collect();
    let aggregate = (comparison.spec.seeds.len() > 1)
        .then(|| (settle(&cand.aggregate), settle(&base.aggregate)));
    Ok(SettlingVerdict {
        candidate,
        baseline,
        pairs,
        aggregate,
    })
}

/// Default relative tolerance for learning-speed verdicts.
pub const SETTLING_FRACTION: f64 = curve::SETTLING_FRACTION;

/// Reproducibility record written next to experiment outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub spec: ExperimentSpec,
}

impl Manifest {
    pub fn new(command: &str, spec: &ExperimentSpec) -> Self {
        Manifest {
            command: command.into(),
            version: version_string(),
            config_sha256: spec.config_hash(),
            seeds: spec.seeds.clone(),
            spec: spec.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, HarnessError> {
        let path = dir.join("manifest.json");
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        fs::write(&path, json).map_err(|e| HarnessError::io(&path, e))?;
        Ok(path)
    }
}

/// Package version plus `git describe` output when built inside a checkout.
pub fn version_string() -> String {
    let pkg = env!("CARGO_PKG_VERSION");
    let described = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    match described {
        Some(d) => format!("{pkg}+{d}"),
        None => pkg.to_string(),
    }
}
