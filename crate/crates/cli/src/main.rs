//! `ponfab` — build PON fabrics, inject link failures, solve energy-aware
//! routing and sweep failure scenarios from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ponfab_core::experiment::{
    emit_report, generate_demands, map_demands, render_table, run_sweep, DemandPattern,
    ExperimentSpec,
};
use ponfab_core::failure::{apply_failure, down_analysis, FailureKind, FailureScenario};
use ponfab_core::metrics::{solution_delay, total_power, DelayModel};
use ponfab_core::optimizer::{
    formulate, load_demands, load_solution, save_demands, save_solution, solve, verify, Demand,
    RoutingMode, SolveStatus, SolverConfig, DEFAULT_MAX_PATHS,
};
use ponfab_core::topology::{
    build_pon3, build_two_tier, load_topology, save_topology, Architecture, Topology,
};

#[derive(Parser)]
#[command(
    name = "ponfab",
    version,
    about = "PON data-centre fabric simulator: failures, energy-aware routing, power and delay"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a fabric and write its topology document.
    BuildTopology(BuildTopologyArgs),
    /// Generate a seeded demand set and write its document.
    GenDemands(GenDemandsArgs),
    /// Solve energy-aware routing for one scenario and dump the solution.
    Solve(SolveArgs),
    /// Sweep NF plus single-link failures across architectures into CSV reports.
    Sweep(SweepArgs),
    /// Re-check a solution dump against its problem.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ArchChoice {
    Pon3,
    #[value(name = "two-tier")]
    TwoTier,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeChoice {
    #[value(name = "single-path")]
    SinglePath,
    Splittable,
}

impl From<ModeChoice> for RoutingMode {
    fn from(m: ModeChoice) -> Self {
        match m {
            ModeChoice::SinglePath => RoutingMode::SinglePath,
            ModeChoice::Splittable => RoutingMode::Splittable,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DelayChoice {
    Endpoints,
    #[value(name = "per-link")]
    PerLink,
}

impl From<DelayChoice> for DelayModel {
    fn from(d: DelayChoice) -> Self {
        match d {
            DelayChoice::Endpoints => DelayModel::Endpoints,
            DelayChoice::PerLink => DelayModel::PerLink,
        }
    }
}

fn parse_volume_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI, e.g. 0.2:0.8")?;
    let lo: f64 = lo.parse().map_err(|e| format!("bad LO: {e}"))?;
    let hi: f64 = hi.parse().map_err(|e| format!("bad HI: {e}"))?;
    if !(lo > 0.0 && lo <= hi) {
        return Err(format!("need 0 < LO <= HI, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn parse_kind(s: &str) -> Result<FailureKind, String> {
    s.trim().parse()
}

#[derive(Args)]
struct BuildTopologyArgs {
    /// Architecture to build.
    #[arg(long, value_enum, default_value = "pon3")]
    arch: ArchChoice,
    /// Servers per rack.
    #[arg(long, default_value_t = 4)]
    servers_per_rack: u32,
    /// Output topology document path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenDemandsArgs {
    /// Servers per rack of the canonical server grid.
    #[arg(long, default_value_t = 4)]
    servers_per_rack: u32,
    /// Draw this many distinct random ordered pairs instead of the default
    /// one-to-one pattern.
    #[arg(long)]
    demand_count: Option<usize>,
    /// Use every ordered server pair once.
    #[arg(long, conflicts_with = "demand_count")]
    all_pairs: bool,
    /// Demand volume range in Gbps.
    #[arg(long, value_parser = parse_volume_range, default_value = "0.2:0.8")]
    volume_range: (f64, f64),
    /// RNG seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Rewrite endpoints for this architecture (pon3 ids are canonical).
    #[arg(long, value_enum, default_value = "pon3")]
    arch: ArchChoice,
    /// Output demand document path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScenarioFlags {
    /// Fail one link by id, or `none` for the NF baseline.
    #[arg(long, default_value = "none")]
    failure: String,
    /// Load a failure scenario document instead.
    #[arg(long, conflicts_with = "failure")]
    scenario: Option<PathBuf>,
}

impl ScenarioFlags {
    fn resolve(&self, topology: &Topology) -> Result<FailureScenario> {
        let scenario = match &self.scenario {
            Some(path) => ponfab_core::failure::load_scenario(path)
                .with_context(|| format!("loading scenario {}", path.display()))?,
            None if self.failure == "none" => FailureScenario::nf(),
            None => FailureScenario::custom(
                format!("fail:{}", self.failure),
                [self.failure.as_str().into()].into_iter().collect(),
            ),
        };
        scenario.validate(topology).context("scenario does not match the topology")?;
        Ok(scenario)
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Architecture to build (conflicts with --topology).
    #[arg(long, value_enum, default_value = "pon3")]
    arch: ArchChoice,
    /// Servers per rack for built architectures.
    #[arg(long, default_value_t = 4)]
    servers_per_rack: u32,
    /// Load a topology document instead of building one.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Load demands from a document.
    #[arg(long)]
    demands: Option<PathBuf>,
    /// Generate this many random ordered pairs instead of the one-to-one default.
    #[arg(long, conflicts_with = "demands")]
    demand_count: Option<usize>,
    /// Demand volume range in Gbps for generated demands.
    #[arg(long, value_parser = parse_volume_range, default_value = "0.2:0.8")]
    volume_range: (f64, f64),
    /// RNG seed for generated demands.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    scenario: ScenarioFlags,
    /// Routing mode.
    #[arg(long, value_enum, default_value = "single-path")]
    mode: ModeChoice,
    /// Delay accounting model.
    #[arg(long, value_enum, default_value = "endpoints")]
    delay_model: DelayChoice,
    /// Candidate paths per demand.
    #[arg(long, default_value_t = DEFAULT_MAX_PATHS)]
    max_paths: usize,
    /// Write topology/demands/scenario/solution documents into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Architectures to sweep.
    #[arg(long, value_enum, default_value = "both")]
    arch: ArchChoice,
    /// Servers per rack.
    #[arg(long, default_value_t = 4)]
    servers_per_rack: u32,
    /// Generate this many random ordered pairs instead of the one-to-one default.
    #[arg(long)]
    demand_count: Option<usize>,
    /// Use every ordered server pair once.
    #[arg(long, conflicts_with = "demand_count")]
    all_pairs: bool,
    /// Demand volume range in Gbps.
    #[arg(long, value_parser = parse_volume_range, default_value = "0.2:0.8")]
    volume_range: (f64, f64),
    /// RNG seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Failure kinds to sweep, comma separated (e.g. F1,F3).
    #[arg(long, value_delimiter = ',', value_parser = parse_kind, default_value = "F1,F2,F3,F4,F5")]
    failures: Vec<FailureKind>,
    /// Routing mode.
    #[arg(long, value_enum, default_value = "single-path")]
    mode: ModeChoice,
    /// Delay accounting model.
    #[arg(long, value_enum, default_value = "endpoints")]
    delay_model: DelayChoice,
    /// Candidate paths per demand.
    #[arg(long, default_value_t = DEFAULT_MAX_PATHS)]
    max_paths: usize,
    /// Output directory for results.csv, summary.csv and manifest.toml.
    #[arg(long, default_value = "sweep-out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Record measured runtimes in the CSV (breaks byte-reproducibility).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Topology document of the problem.
    #[arg(long)]
    topology: PathBuf,
    /// Demand document of the problem.
    #[arg(long)]
    demands: PathBuf,
    #[command(flatten)]
    scenario: ScenarioFlags,
    /// Routing mode the solution was produced under.
    #[arg(long, value_enum, default_value = "single-path")]
    mode: ModeChoice,
    /// Candidate paths per demand used when the problem was formulated.
    #[arg(long, default_value_t = DEFAULT_MAX_PATHS)]
    max_paths: usize,
    /// Solution dump to check.
    #[arg(long)]
    solution: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::BuildTopology(args) => cmd_build_topology(args),
        Command::GenDemands(args) => cmd_gen_demands(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn print_config(title: &str, entries: &[(&str, String)]) {
    println!("resolved configuration: {title}");
    for (key, value) in entries {
        println!("  {key} = {value}");
    }
}

fn build_arch(arch: ArchChoice, servers_per_rack: u32) -> Result<Topology> {
    match arch {
        ArchChoice::Pon3 => Ok(build_pon3(servers_per_rack)),
        ArchChoice::TwoTier => Ok(build_two_tier(servers_per_rack)),
        ArchChoice::Both => bail!("this subcommand needs a single architecture"),
    }
}

fn arch_name(arch: ArchChoice) -> &'static str {
    match arch {
        ArchChoice::Pon3 => "pon3",
        ArchChoice::TwoTier => "two-tier",
        ArchChoice::Both => "both",
    }
}

fn cmd_build_topology(args: BuildTopologyArgs) -> Result<ExitCode> {
    print_config(
        "build-topology",
        &[
            ("arch", arch_name(args.arch).to_string()),
            ("servers_per_rack", args.servers_per_rack.to_string()),
            ("out", args.out.display().to_string()),
        ],
    );
    let t = build_arch(args.arch, args.servers_per_rack)?;
    save_topology(&t, &args.out)?;
    println!("wrote {} ({} nodes, {} links)", args.out.display(), t.node_count(), t.link_count());
    Ok(ExitCode::SUCCESS)
}

fn demand_spec(
    servers_per_rack: u32,
    demand_count: Option<usize>,
    all_pairs: bool,
    volume_range: (f64, f64),
    seed: u64,
) -> ExperimentSpec {
    let pattern = if all_pairs {
        DemandPattern::AllPairs
    } else if let Some(count) = demand_count {
        DemandPattern::RandomPairs { count }
    } else {
        DemandPattern::OneToOne
    };
    ExperimentSpec {
        servers_per_rack,
        pattern,
        volume_range_gbps: volume_range,
        seed,
        ..ExperimentSpec::default()
    }
}

fn pattern_name(spec: &ExperimentSpec) -> String {
    match spec.pattern {
        DemandPattern::OneToOne => "one-to-one".to_string(),
        DemandPattern::RandomPairs { count } => format!("random-pairs({count})"),
        DemandPattern::AllPairs => "all-pairs".to_string(),
    }
}

fn cmd_gen_demands(args: GenDemandsArgs) -> Result<ExitCode> {
    let spec = demand_spec(
        args.servers_per_rack,
        args.demand_count,
        args.all_pairs,
        args.volume_range,
        args.seed,
    );
    print_config(
        "gen-demands",
        &[
            ("arch", arch_name(args.arch).to_string()),
            ("servers_per_rack", args.servers_per_rack.to_string()),
            ("pattern", pattern_name(&spec)),
            ("volume_range", format!("{}:{}", args.volume_range.0, args.volume_range.1)),
            ("seed", args.seed.to_string()),
            ("out", args.out.display().to_string()),
        ],
    );
    let canonical = generate_demands(&spec)?;
    let demands = match args.arch {
        ArchChoice::Both => bail!("gen-demands needs a single architecture"),
        ArchChoice::Pon3 => canonical,
        ArchChoice::TwoTier => map_demands(Architecture::TwoTier, &canonical),
    };
    save_demands(&demands, &args.out)?;
    println!("wrote {} ({} demands)", args.out.display(), demands.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let (topology, topo_label) = match &args.topology {
        Some(path) => (
            load_topology(path).with_context(|| format!("loading {}", path.display()))?,
            path.display().to_string(),
        ),
        None => (
            build_arch(args.arch, args.servers_per_rack)?,
            format!("built:{}", arch_name(args.arch)),
        ),
    };

    let demands: Vec<Demand> = match &args.demands {
        Some(path) => {
            load_demands(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => {
            if args.topology.is_some() {
                bail!("--topology needs --demands (generated demands target built fabrics)");
            }
            let spec = demand_spec(
                args.servers_per_rack,
                args.demand_count,
                false,
                args.volume_range,
                args.seed,
            );
            let canonical = generate_demands(&spec)?;
            match args.arch {
                ArchChoice::TwoTier => map_demands(Architecture::TwoTier, &canonical),
                _ => canonical,
            }
        }
    };

    let scenario = args.scenario.resolve(&topology)?;
    print_config(
        "solve",
        &[
            ("topology", topo_label),
            (
                "demands",
                args.demands.as_ref().map_or_else(
                    || format!("generated(seed={})", args.seed),
                    |p| p.display().to_string(),
                ),
            ),
            ("scenario", scenario.name()),
            (
                "mode",
                if args.mode == ModeChoice::SinglePath { "single-path" } else { "splittable" }
                    .into(),
            ),
            (
                "delay_model",
                if args.delay_model == DelayChoice::Endpoints { "endpoints" } else { "per-link" }
                    .into(),
            ),
            ("max_paths", args.max_paths.to_string()),
        ],
    );

    let failed = apply_failure(&topology, &scenario)?;
    let problem = formulate(&failed, demands.clone(), args.mode.into(), args.max_paths)?;
    let cfg = SolverConfig::default();
    let solution = solve(&problem, &cfg)?;
    let violations = verify(&problem, &solution, &cfg);
    let power = total_power(&solution, failed.device_params());
    let delay =
        solution_delay(&problem, &solution, failed.device_params(), args.delay_model.into());
    let down = down_analysis(&topology, &scenario, &demands)?;

    println!("status            = {}", solution.status);
    println!("objective_w       = {:.6}", solution.objective_w);
    println!("total_power_w     = {:.6}", power.total_w);
    println!("active_servers    = {}", solution.active_servers.len());
    println!("active_olts       = {}", solution.active_olts.len());
    println!("olt_forwarded     = {:.6} Gbps", solution.total_olt_forwarded_gbps());
    println!("mean_delay_us     = {:.9}", delay.mean_us);
    println!("max_delay_us      = {:.9}", delay.max_us);
    println!("dead_demands      = {}", down.dead_demands.len());
    println!("down_servers      = {}", down.down_servers.len());
    for v in &violations {
        println!("violation: {v}");
    }

    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        save_topology(&topology, &out.join("topology.toml"))?;
        save_demands(&demands, &out.join("demands.toml"))?;
        std::fs::write(
            out.join("scenario.toml"),
            ponfab_core::failure::save_scenario_str(&scenario),
        )
        .with_context(|| format!("writing {}", out.join("scenario.toml").display()))?;
        save_solution(&solution, &out.join("solution.toml"))?;
        println!("wrote problem and solution documents to {}", out.display());
    }

    if !violations.is_empty() {
        return Ok(ExitCode::from(1));
    }
    match solution.status {
        SolveStatus::Infeasible => Ok(ExitCode::from(2)),
        _ => Ok(ExitCode::SUCCESS),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let architectures = match args.arch {
        ArchChoice::Pon3 => vec![Architecture::Pon3],
        ArchChoice::TwoTier => vec![Architecture::TwoTier],
        ArchChoice::Both => vec![Architecture::Pon3, Architecture::TwoTier],
    };
    let mut spec = demand_spec(
        args.servers_per_rack,
        args.demand_count,
        args.all_pairs,
        args.volume_range,
        args.seed,
    );
    spec.architectures = architectures;
    spec.failure_kinds = args.failures.clone();
    spec.mode = args.mode.into();
    spec.delay_model = args.delay_model.into();
    spec.max_paths = args.max_paths;
    spec.jobs = args.jobs;
    spec.timing = args.timing;

    println!("resolved configuration: sweep");
    print!("{}", indent(&toml::to_string_pretty(&spec)?));

    let result = run_sweep(&spec)?;
    print!("{}", render_table(&result));
    let files = emit_report(&result, &args.out)?;
    for f in &files {
        println!("wrote {}", f.display());
    }

    let errors: Vec<&str> = result.outcomes.iter().filter_map(|o| o.error.as_deref()).collect();
    if !errors.is_empty() {
        for e in &errors {
            eprintln!("scenario error: {e}");
        }
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn indent(s: &str) -> String {
    s.lines().map(|l| format!("  {l}\n")).collect()
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let topology = load_topology(&args.topology)
        .with_context(|| format!("loading {}", args.topology.display()))?;
    let demands = load_demands(&args.demands)
        .with_context(|| format!("loading {}", args.demands.display()))?;
    let scenario = args.scenario.resolve(&topology)?;
    let solution = load_solution(&args.solution)
        .with_context(|| format!("loading {}", args.solution.display()))?;

    print_config(
        "verify",
        &[
            ("topology", args.topology.display().to_string()),
            ("demands", args.demands.display().to_string()),
            ("scenario", scenario.name()),
            ("solution", args.solution.display().to_string()),
        ],
    );

    let failed = apply_failure(&topology, &scenario)?;
    let problem = formulate(&failed, demands, args.mode.into(), args.max_paths)?;
    let violations = verify(&problem, &solution, &SolverConfig::default());
    if violations.is_empty() {
        println!("solution verifies: no violations");
        Ok(ExitCode::SUCCESS)
    } else {
        for v in &violations {
            println!("violation: {v}");
        }
        Ok(ExitCode::from(1))
    }
}
