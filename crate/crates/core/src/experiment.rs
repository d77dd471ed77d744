//! Seeded experiments: demand generation, failure sweeps and reports.
//!
//! A sweep evaluates NF plus every single-link failure of the requested
//! kinds on each architecture, using one paired demand set: demands are
//! generated over the canonical 4-rack server grid and mapped onto each
//! architecture by the pairing rule `srv-{rack}-{slot}` <->
//! `srv-{cell=rack}-0-{slot}`, so both fabrics carry the same traffic.
//! Everything is deterministic under the seed; CSV outputs are byte-identical
//! across runs unless real timings are explicitly requested.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::failure::{
    apply_failure, down_analysis, enumerate_single_failures, DownReport, FailureError,
    FailureKind, FailureScenario,
};
use crate::metrics::{solution_delay, total_power, DelayModel, DelayReport, PowerReport};
use crate::optimizer::{
    formulate, solve, verify, Demand, OptimizeError, RoutingMode, SolveStatus, SolverConfig,
    DEFAULT_MAX_PATHS,
};
use crate::topology::{build_pon3_with, build_two_tier_with, Architecture, Topology};

/// How demand endpoints are drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemandPattern {
    /// A seeded cyclic permutation of the servers: every server sources
    /// exactly one demand and sinks exactly one. Keeps per-server load within
    /// the 1 Gbps server rate, so endpoint queues stay stable. Default.
    #[default]
    OneToOne,
    /// `count` distinct ordered pairs drawn uniformly without replacement.
    RandomPairs { count: usize },
    /// Every ordered pair exactly once.
    AllPairs,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub architectures: Vec<Architecture>,
    pub servers_per_rack: u32,
    pub pattern: DemandPattern,
    pub volume_range_gbps: (f64, f64),
    pub seed: u64,
    pub failure_kinds: Vec<FailureKind>,
    pub mode: RoutingMode,
    pub delay_model: DelayModel,
    pub max_paths: usize,
    pub solver: SolverConfig,
    /// Worker threads for scenario evaluation; 0 picks the rayon default.
    pub jobs: usize,
    /// Write measured runtimes into the CSV instead of zeros. Breaks
    /// byte-reproducibility of the outputs; timings always land in the
    /// manifest regardless.
    pub timing: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            architectures: vec![Architecture::Pon3, Architecture::TwoTier],
            servers_per_rack: 4,
            pattern: DemandPattern::OneToOne,
            volume_range_gbps: (0.2, 0.8),
            seed: 42,
            failure_kinds: FailureKind::ALL.to_vec(),
            mode: RoutingMode::SinglePath,
            delay_model: DelayModel::Endpoints,
            max_paths: DEFAULT_MAX_PATHS,
            solver: SolverConfig::default(),
            jobs: 0,
            timing: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {0}")]
    BadSpec(String),
    #[error("requested {requested} demands but only {available} distinct ordered pairs exist")]
    TooManyDemands { requested: usize, available: usize },
    #[error(transparent)]
    Topology(#[from] crate::topology::TopologyError),
    #[error(transparent)]
    Failure(#[from] FailureError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv write failed: {0}")]
    Csv(#[from] csv::Error),
}

/// The canonical (rack, slot) server grid demands are generated over.
fn canonical_servers(servers_per_rack: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for r in 0..4 {
        for s in 0..servers_per_rack {
            out.push((r, s));
        }
    }
    out
}

fn canonical_id(rack: u32, slot: u32) -> String {
    format!("srv-{rack}-{slot:02}")
}

/// Maps a canonical server id onto an architecture: identity for pon3, and
/// `srv-{rack}-{slot}` -> `srv-{cell=rack}-0-{slot}` for the two-tier fabric.
pub fn map_server_id(arch: Architecture, canonical: &str) -> String {
    match arch {
        Architecture::Pon3 => canonical.to_string(),
        Architecture::TwoTier => {
            let mut parts = canonical.splitn(3, '-');
            let (Some("srv"), Some(rack), Some(slot)) = (parts.next(), parts.next(), parts.next())
            else {
                return canonical.to_string();
            };
            format!("srv-{rack}-0-{slot}")
        }
    }
}

/// Rewrites canonical demand endpoints for an architecture.
pub fn map_demands(arch: Architecture, demands: &[Demand]) -> Vec<Demand> {
    demands
        .iter()
        .map(|d| Demand {
            id: d.id.clone(),
            src: crate::topology::NodeId(map_server_id(arch, &d.src.0)),
            dst: crate::topology::NodeId(map_server_id(arch, &d.dst.0)),
            volume_gbps: d.volume_gbps,
        })
        .collect()
}

/// Generates the seeded canonical demand set: endpoints first (pattern
/// dependent), then one uniform volume per demand, in demand order.
pub fn generate_demands(spec: &ExperimentSpec) -> Result<Vec<Demand>, ExperimentError> {
    let (lo, hi) = spec.volume_range_gbps;
    if lo.is_nan() || hi.is_nan() || lo <= 0.0 || lo > hi {
        return Err(ExperimentError::BadSpec(format!(
            "volume range must satisfy 0 < lo <= hi, got {lo}..{hi}"
        )));
    }
    if spec.servers_per_rack < 1 {
        return Err(ExperimentError::BadSpec("servers_per_rack must be >= 1".into()));
    }
    let servers = canonical_servers(spec.servers_per_rack);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let pairs: Vec<((u32, u32), (u32, u32))> = match spec.pattern {
        DemandPattern::OneToOne => {
            // Sattolo shuffle: a uniform single-cycle permutation, hence no
            // fixed points — every server sources and sinks exactly once.
            let n = servers.len();
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.random_range(0..i);
                perm.swap(i, j);
            }
            (0..n).map(|i| (servers[i], servers[perm[i]])).collect()
        }
        DemandPattern::RandomPairs { count } => {
            let mut all = all_ordered_pairs(&servers);
            if count > all.len() {
                return Err(ExperimentError::TooManyDemands {
                    requested: count,
                    available: all.len(),
                });
            }
            // Partial Fisher-Yates: the first `count` entries are a uniform
            // sample without replacement.
            for i in 0..count {
                let j = rng.random_range(i..all.len());
                all.swap(i, j);
            }
            all.truncate(count);
            all
        }
        DemandPattern::AllPairs => all_ordered_pairs(&servers),
    };

    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(i, ((sr, ss), (dr, ds)))| {
            let volume = rng.random_range(lo..=hi);
            Demand::new(format!("d{i:03}"), canonical_id(sr, ss), canonical_id(dr, ds), volume)
        })
        .collect())
}

fn all_ordered_pairs(servers: &[(u32, u32)]) -> Vec<((u32, u32), (u32, u32))> {
    let mut out = Vec::new();
    for &a in servers {
        for &b in servers {
            if a != b {
                out.push((a, b));
            }
        }
    }
    out
}

/// Everything measured for one (architecture, scenario) evaluation.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub architecture: Architecture,
    pub kind: Option<FailureKind>,
    pub scenario: FailureScenario,
    pub name: String,
    pub status: Option<SolveStatus>,
    pub error: Option<String>,
    pub power: Option<PowerReport>,
    pub delay: Option<DelayReport>,
    pub down: Option<DownReport>,
    pub olt_forwarded_gbps: f64,
    pub violations: Vec<String>,
    pub runtime_ms: u64,
}

impl ScenarioOutcome {
    pub fn total_w(&self) -> f64 {
        self.power.as_ref().map(|p| p.total_w).unwrap_or(f64::NAN)
    }

    pub fn mean_delay_us(&self) -> f64 {
        self.delay.as_ref().map(|d| d.mean_us).unwrap_or(f64::NAN)
    }

    pub fn max_delay_us(&self) -> f64 {
        self.delay.as_ref().map(|d| d.max_us).unwrap_or(f64::NAN)
    }

    pub fn dead_demands(&self) -> usize {
        self.down.as_ref().map(|d| d.dead_demands.len()).unwrap_or(0)
    }

    pub fn down_servers(&self) -> usize {
        self.down.as_ref().map(|d| d.down_servers.len()).unwrap_or(0)
    }

    fn status_str(&self) -> String {
        match (&self.error, self.status) {
            (Some(_), _) => "error".to_string(),
            (None, Some(s)) => s.to_string(),
            (None, None) => "unknown".to_string(),
        }
    }

    fn severity(&self) -> u8 {
        match (&self.error, self.status) {
            (Some(_), _) => 3,
            (None, Some(SolveStatus::Infeasible)) => 2,
            (None, Some(SolveStatus::Partial)) => 1,
            _ => 0,
        }
    }
}

/// One aggregated data row: NF, or the worst case over a kind's scenarios.
#[derive(Debug, Clone)]
pub struct KindRow {
    pub architecture: Architecture,
    pub label: String,
    pub status: String,
    pub total_w: f64,
    pub mean_delay_us: f64,
    pub max_delay_us: f64,
    pub olt_forwarded_gbps: f64,
    pub dead_demands: usize,
    pub down_servers: usize,
    pub runtime_ms: u64,
}

/// Per-kind percentage deltas against the same architecture's NF row.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub architecture: Architecture,
    pub kind: FailureKind,
    pub scenarios: usize,
    pub sd_scenarios: usize,
    /// Deltas over scenarios that solved to optimality; None when none did.
    pub worst_power_delta_pct: Option<f64>,
    pub mean_power_delta_pct: Option<f64>,
    pub worst_delay_delta_pct: Option<f64>,
    pub mean_delay_delta_pct: Option<f64>,
}

/// Full sweep result: per-scenario outcomes plus the aggregated rows.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub spec: ExperimentSpec,
    pub demands: Vec<Demand>,
    pub outcomes: Vec<ScenarioOutcome>,
    pub rows: Vec<KindRow>,
    pub summary: Vec<SummaryRow>,
}

fn build_architecture(spec: &ExperimentSpec, arch: Architecture) -> Topology {
    let device = crate::metrics::DeviceParams::default();
    match arch {
        Architecture::Pon3 => build_pon3_with(spec.servers_per_rack, device),
        Architecture::TwoTier => build_two_tier_with(spec.servers_per_rack, device),
    }
}

fn evaluate_scenario(
    spec: &ExperimentSpec,
    arch: Architecture,
    base: &Topology,
    demands: &[Demand],
    kind: Option<FailureKind>,
    scenario: &FailureScenario,
) -> ScenarioOutcome {
    let started = Instant::now();
    let mut outcome = ScenarioOutcome {
        architecture: arch,
        kind,
        scenario: scenario.clone(),
        name: scenario.name(),
        status: None,
        error: None,
        power: None,
        delay: None,
        down: None,
        olt_forwarded_gbps: 0.0,
        violations: Vec::new(),
        runtime_ms: 0,
    };

    let result = (|| -> Result<(), ExperimentError> {
        let failed = apply_failure(base, scenario)?;
        let problem = formulate(&failed, demands.to_vec(), spec.mode, spec.max_paths)?;
        let solution = solve(&problem, &spec.solver)?;
        outcome.status = Some(solution.status);
        outcome.olt_forwarded_gbps = solution.total_olt_forwarded_gbps();
        outcome.violations =
            verify(&problem, &solution, &spec.solver).iter().map(|v| v.to_string()).collect();
        outcome.power = Some(total_power(&solution, failed.device_params()));
        outcome.delay =
            Some(solution_delay(&problem, &solution, failed.device_params(), spec.delay_model));
        outcome.down = Some(down_analysis(base, scenario, demands)?);
        Ok(())
    })();
    if let Err(e) = result {
        outcome.error = Some(e.to_string());
    }
    outcome.runtime_ms = started.elapsed().as_millis() as u64;
    outcome
}

/// Runs the full sweep: for each architecture, NF plus every single-link
/// failure of each requested kind, solved, verified and measured. Scenario
/// evaluations run in parallel (capped by `jobs`) and results are assembled
/// in a fixed order, so the output never depends on scheduling.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepResult, ExperimentError> {
    if spec.architectures.is_empty() {
        return Err(ExperimentError::BadSpec("no architectures selected".into()));
    }
    let demands = generate_demands(spec)?;

    // (arch, kind, scenario) tasks in deterministic order.
    let mut tasks: Vec<(Architecture, Option<FailureKind>, FailureScenario)> = Vec::new();
    let mut topologies: BTreeMap<String, (Topology, Vec<Demand>)> = BTreeMap::new();
    for &arch in &spec.architectures {
        let base = build_architecture(spec, arch);
        let mapped = map_demands(arch, &demands);
        tasks.push((arch, None, FailureScenario::nf()));
        for &kind in &spec.failure_kinds {
            for scenario in enumerate_single_failures(&base, kind) {
                tasks.push((arch, Some(kind), scenario));
            }
        }
        topologies.insert(arch.to_string(), (base, mapped));
    }

    let eval = |(arch, kind, scenario): &(Architecture, Option<FailureKind>, FailureScenario)| {
        let (base, mapped) = &topologies[&arch.to_string()];
        evaluate_scenario(spec, *arch, base, mapped, *kind, scenario)
    };
    let outcomes: Vec<ScenarioOutcome> = if spec.jobs == 1 {
        tasks.iter().map(eval).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| ExperimentError::BadSpec(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            tasks.par_iter().map(eval).collect()
        })
    };

    let rows = aggregate_rows(spec, &outcomes);
    let summary = aggregate_summary(spec, &outcomes);
    Ok(SweepResult { spec: spec.clone(), demands, outcomes, rows, summary })
}

fn aggregate_rows(spec: &ExperimentSpec, outcomes: &[ScenarioOutcome]) -> Vec<KindRow> {
    let mut rows = Vec::new();
    for &arch in &spec.architectures {
        let nf = outcomes.iter().find(|o| o.architecture == arch && o.kind.is_none());
        if let Some(nf) = nf {
            rows.push(row_from(nf, "NF", spec.timing));
        }
        for &kind in &spec.failure_kinds {
            let of_kind: Vec<&ScenarioOutcome> = outcomes
                .iter()
                .filter(|o| o.architecture == arch && o.kind == Some(kind))
                .collect();
            if of_kind.is_empty() {
                continue;
            }
            let nf_power = nf.map(|o| o.total_w()).unwrap_or(f64::NAN);
            let nf_delay = nf.map(|o| o.mean_delay_us()).unwrap_or(f64::NAN);
            // Worst case: highest severity first; among partial scenarios the
            // most dead demands; among optimal ones the largest power then
            // delay delta; earliest scenario on ties.
            let worst = of_kind
                .iter()
                .enumerate()
                .max_by(|(ia, a), (ib, b)| {
                    let key = |o: &ScenarioOutcome| {
                        (o.severity(), o.dead_demands(), o.total_w() - nf_power,
                         o.mean_delay_us() - nf_delay)
                    };
                    let (ka, kb) = (key(a), key(b));
                    ka.0.cmp(&kb.0)
                        .then(ka.1.cmp(&kb.1))
                        .then(ka.2.partial_cmp(&kb.2).unwrap_or(std::cmp::Ordering::Equal))
                        .then(ka.3.partial_cmp(&kb.3).unwrap_or(std::cmp::Ordering::Equal))
                        .then(ib.cmp(ia)) // prefer the earliest on full ties
                })
                .map(|(_, o)| *o)
                .expect("non-empty kind group");
            rows.push(row_from(worst, &kind.to_string(), spec.timing));
        }
    }
    rows
}

fn row_from(o: &ScenarioOutcome, label: &str, timing: bool) -> KindRow {
    KindRow {
        architecture: o.architecture,
        label: label.to_string(),
        status: o.status_str(),
        total_w: o.total_w(),
        mean_delay_us: o.mean_delay_us(),
        max_delay_us: o.max_delay_us(),
        olt_forwarded_gbps: o.olt_forwarded_gbps,
        dead_demands: o.dead_demands(),
        down_servers: o.down_servers(),
        runtime_ms: if timing { o.runtime_ms } else { 0 },
    }
}

fn aggregate_summary(spec: &ExperimentSpec, outcomes: &[ScenarioOutcome]) -> Vec<SummaryRow> {
    let mut summary = Vec::new();
    for &arch in &spec.architectures {
        let nf = outcomes.iter().find(|o| o.architecture == arch && o.kind.is_none());
        let (nf_power, nf_delay) = match nf {
            Some(o) => (o.total_w(), o.mean_delay_us()),
            None => (f64::NAN, f64::NAN),
        };
        for &kind in &spec.failure_kinds {
            let of_kind: Vec<&ScenarioOutcome> = outcomes
                .iter()
                .filter(|o| o.architecture == arch && o.kind == Some(kind))
                .collect();
            if of_kind.is_empty() {
                continue;
            }
            let sd = of_kind.iter().filter(|o| o.severity() > 0).count();
            let solved: Vec<&&ScenarioOutcome> =
                of_kind.iter().filter(|o| o.severity() == 0).collect();
            let power_deltas: Vec<f64> =
                solved.iter().map(|o| (o.total_w() - nf_power) / nf_power * 100.0).collect();
            let delay_deltas: Vec<f64> =
                solved.iter().map(|o| (o.mean_delay_us() - nf_delay) / nf_delay * 100.0).collect();
            let worst = |v: &[f64]| v.iter().copied().fold(None, |acc: Option<f64>, x| {
                Some(acc.map_or(x, |a| a.max(x)))
            });
            let mean = |v: &[f64]| {
                if v.is_empty() { None } else { Some(v.iter().sum::<f64>() / v.len() as f64) }
            };
            summary.push(SummaryRow {
                architecture: arch,
                kind,
                scenarios: of_kind.len(),
                sd_scenarios: sd,
                worst_power_delta_pct: worst(&power_deltas),
                mean_power_delta_pct: mean(&power_deltas),
                worst_delay_delta_pct: worst(&delay_deltas),
                mean_delay_delta_pct: mean(&delay_deltas),
            });
        }
    }
    summary
}

// --- emission ----------------------------------------------------------------

fn fmt_w(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

fn fmt_us(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.9}")
    }
}

fn fmt_pct(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(v) if v.is_nan() => String::new(),
        Some(v) if v.is_infinite() => "inf".to_string(),
        Some(v) => format!("{v:.4}"),
    }
}

/// Normative data CSV header.
pub const RESULTS_HEADER: [&str; 9] = [
    "label",
    "status",
    "total_w",
    "mean_delay_us",
    "max_delay_us",
    "olt_forwarded_gbps",
    "dead_demands",
    "down_servers",
    "runtime_ms",
];

/// Writes `results.csv`, `summary.csv` and `manifest.toml` into `out_dir`,
/// returning the created paths. The CSV content is byte-identical across runs
/// of the same spec unless `timing` was requested.
pub fn emit_report(result: &SweepResult, out_dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|source| ExperimentError::Io { path: out_dir.display().to_string(), source })?;
    let mut written = Vec::new();

    let results_path = out_dir.join("results.csv");
    {
        let mut w = csv::Writer::from_path(&results_path)?;
        w.write_record(RESULTS_HEADER)?;
        for row in &result.rows {
            w.write_record([
                format!("{}:{}", row.architecture, row.label),
                row.status.clone(),
                fmt_w(row.total_w),
                fmt_us(row.mean_delay_us),
                fmt_us(row.max_delay_us),
                fmt_w(row.olt_forwarded_gbps),
                row.dead_demands.to_string(),
                row.down_servers.to_string(),
                row.runtime_ms.to_string(),
            ])?;
        }
        w.flush().map_err(|source| ExperimentError::Io {
            path: results_path.display().to_string(),
            source,
        })?;
    }
    written.push(results_path);

    let summary_path = out_dir.join("summary.csv");
    {
        let mut w = csv::Writer::from_path(&summary_path)?;
        w.write_record([
            "architecture",
            "kind",
            "scenarios",
            "sd_scenarios",
            "worst_power_delta_pct",
            "mean_power_delta_pct",
            "worst_delay_delta_pct",
            "mean_delay_delta_pct",
        ])?;
        for row in &result.summary {
            w.write_record([
                row.architecture.to_string(),
                row.kind.to_string(),
                row.scenarios.to_string(),
                row.sd_scenarios.to_string(),
                fmt_pct(row.worst_power_delta_pct),
                fmt_pct(row.mean_power_delta_pct),
                fmt_pct(row.worst_delay_delta_pct),
                fmt_pct(row.mean_delay_delta_pct),
            ])?;
        }
        w.flush().map_err(|source| ExperimentError::Io {
            path: summary_path.display().to_string(),
            source,
        })?;
    }
    written.push(summary_path);

    let manifest_path = out_dir.join("manifest.toml");
    let manifest = Manifest {
        spec: result.spec.clone(),
        demands: result
            .demands
            .iter()
            .map(|d| ManifestDemand {
                id: d.id.0.clone(),
                src: d.src.0.clone(),
                dst: d.dst.0.clone(),
                volume: d.volume_gbps,
            })
            .collect(),
        scenarios: result
            .outcomes
            .iter()
            .map(|o| ManifestScenario {
                architecture: o.architecture.to_string(),
                name: o.name.clone(),
                status: o.status_str(),
                runtime_ms: o.runtime_ms,
                error: o.error.clone(),
            })
            .collect(),
    };
    std::fs::write(
        &manifest_path,
        toml::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(|source| ExperimentError::Io { path: manifest_path.display().to_string(), source })?;
    written.push(manifest_path);

    Ok(written)
}

#[derive(Debug, Serialize)]
struct Manifest {
    spec: ExperimentSpec,
    demands: Vec<ManifestDemand>,
    scenarios: Vec<ManifestScenario>,
}

#[derive(Debug, Serialize)]
struct ManifestDemand {
    id: String,
    src: String,
    dst: String,
    volume: f64,
}

#[derive(Debug, Serialize)]
struct ManifestScenario {
    architecture: String,
    name: String,
    status: String,
    runtime_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Renders the aggregated rows as an aligned text table for stdout.
pub fn render_table(result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<18} {:<10} {:>12} {:>15} {:>15} {:>10} {:>6} {:>7} {:>8}\n",
        "scenario", "status", "total_w", "mean_delay_us", "max_delay_us", "olt_gbps", "dead",
        "down", "runtime"
    ));
    for row in &result.rows {
        out.push_str(&format!(
            "{:<18} {:<10} {:>12} {:>15} {:>15} {:>10} {:>6} {:>7} {:>8}\n",
            format!("{}:{}", row.architecture, row.label),
            row.status,
            fmt_w(row.total_w),
            fmt_us(row.mean_delay_us),
            fmt_us(row.max_delay_us),
            format!("{:.3}", row.olt_forwarded_gbps),
            row.dead_demands,
            row.down_servers,
            row.runtime_ms,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_spec() -> ExperimentSpec {
        ExperimentSpec {
            servers_per_rack: 1,
            failure_kinds: vec![FailureKind::F3],
            jobs: 1,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn demand_generation_is_deterministic() {
        let spec = ExperimentSpec::default();
        let a = generate_demands(&spec).unwrap();
        let b = generate_demands(&spec).unwrap();
        assert_eq!(a, b);
        let other = ExperimentSpec { seed: 43, ..spec };
        assert_ne!(a, generate_demands(&other).unwrap());
    }

    #[test]
    fn one_to_one_touches_every_server_once() {
        let spec = ExperimentSpec::default();
        let demands = generate_demands(&spec).unwrap();
        assert_eq!(demands.len(), 16);
        let sources: std::collections::BTreeSet<_> = demands.iter().map(|d| &d.src).collect();
        let sinks: std::collections::BTreeSet<_> = demands.iter().map(|d| &d.dst).collect();
        assert_eq!(sources.len(), 16);
        assert_eq!(sinks.len(), 16);
        assert!(demands.iter().all(|d| d.src != d.dst));
    }

    #[test]
    fn volumes_stay_in_range_with_the_expected_mean() {
        let spec = ExperimentSpec {
            pattern: DemandPattern::RandomPairs { count: 1000 },
            servers_per_rack: 16,
            ..ExperimentSpec::default()
        };
        let demands = generate_demands(&spec).unwrap();
        assert_eq!(demands.len(), 1000);
        assert!(demands.iter().all(|d| (0.2..=0.8).contains(&d.volume_gbps)));
        let mean = demands.iter().map(|d| d.volume_gbps).sum::<f64>() / demands.len() as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn all_pairs_covers_every_ordered_pair() {
        let spec = ExperimentSpec {
            pattern: DemandPattern::AllPairs,
            servers_per_rack: 1,
            ..ExperimentSpec::default()
        };
        let demands = generate_demands(&spec).unwrap();
        assert_eq!(demands.len(), 12);
        let pairs: std::collections::BTreeSet<_> =
            demands.iter().map(|d| (d.src.clone(), d.dst.clone())).collect();
        assert_eq!(pairs.len(), 12);
    }

    #[test]
    fn random_pairs_rejects_oversized_requests() {
        let spec = ExperimentSpec {
            pattern: DemandPattern::RandomPairs { count: 13 },
            servers_per_rack: 1,
            ..ExperimentSpec::default()
        };
        assert!(matches!(
            generate_demands(&spec),
            Err(ExperimentError::TooManyDemands { requested: 13, available: 12 })
        ));
    }

    #[test]
    fn pairing_maps_between_architectures() {
        assert_eq!(map_server_id(Architecture::Pon3, "srv-2-03"), "srv-2-03");
        assert_eq!(map_server_id(Architecture::TwoTier, "srv-2-03"), "srv-2-0-03");
        // Mapped endpoints exist in the two-tier fabric.
        let spec = ExperimentSpec::default();
        let demands = map_demands(Architecture::TwoTier, &generate_demands(&spec).unwrap());
        let t = crate::topology::build_two_tier(4);
        for d in &demands {
            assert!(t.node(&d.src).is_some(), "{}", d.src);
            assert!(t.node(&d.dst).is_some(), "{}", d.dst);
        }
    }

    #[test]
    fn sweep_rows_count_architectures_times_scenario_kinds() {
        let spec = ExperimentSpec {
            failure_kinds: FailureKind::ALL.to_vec(),
            servers_per_rack: 1,
            jobs: 1,
            ..ExperimentSpec::default()
        };
        let result = run_sweep(&spec).unwrap();
        // 2 architectures x (NF + 5 kinds) = 12 aggregated rows.
        assert_eq!(result.rows.len(), 12);
    }

    #[test]
    fn nf_rows_agree_across_architectures() {
        let result = run_sweep(&quick_spec()).unwrap();
        let nf: Vec<&KindRow> = result.rows.iter().filter(|r| r.label == "NF").collect();
        assert_eq!(nf.len(), 2);
        assert_eq!(nf[0].total_w, nf[1].total_w);
        assert_eq!(nf[0].mean_delay_us, nf[1].mean_delay_us);
    }

    #[test]
    fn f3_penalizes_pon3_but_not_two_tier() {
        let result = run_sweep(&quick_spec()).unwrap();
        let row = |arch: Architecture, label: &str| {
            result
                .rows
                .iter()
                .find(|r| r.architecture == arch && r.label == label)
                .unwrap()
                .clone()
        };
        let pon3_nf = row(Architecture::Pon3, "NF");
        let pon3_f3 = row(Architecture::Pon3, "F3");
        assert!(pon3_f3.total_w > pon3_nf.total_w);
        assert!(pon3_f3.olt_forwarded_gbps > 0.0);
        let tt_nf = row(Architecture::TwoTier, "NF");
        let tt_f3 = row(Architecture::TwoTier, "F3");
        assert_eq!(tt_f3.total_w, tt_nf.total_w);
        assert_eq!(tt_f3.olt_forwarded_gbps, 0.0);
        let tt_summary = result
            .summary
            .iter()
            .find(|s| s.architecture == Architecture::TwoTier && s.kind == FailureKind::F3)
            .unwrap();
        assert_eq!(tt_summary.worst_power_delta_pct, Some(0.0));
    }

    #[test]
    fn sweep_rows_do_not_depend_on_the_thread_count() {
        let sequential = run_sweep(&quick_spec()).unwrap();
        let parallel = run_sweep(&ExperimentSpec { jobs: 4, ..quick_spec() }).unwrap();
        assert_eq!(sequential.rows.len(), parallel.rows.len());
        for (a, b) in sequential.rows.iter().zip(&parallel.rows) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.status, b.status);
            assert_eq!(a.total_w, b.total_w);
            assert_eq!(a.mean_delay_us, b.mean_delay_us);
        }
    }

    #[test]
    fn emitted_csv_is_byte_stable() {
        let spec = quick_spec();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        emit_report(&run_sweep(&spec).unwrap(), dir_a.path()).unwrap();
        emit_report(&run_sweep(&spec).unwrap(), dir_b.path()).unwrap();
        for file in ["results.csv", "summary.csv"] {
            let a = std::fs::read(dir_a.path().join(file)).unwrap();
            let b = std::fs::read(dir_b.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs");
        }
    }
}
