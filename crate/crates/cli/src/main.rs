//! `cloudlet-plan`: generate scenarios, plan cloudlet placements, check
//! solutions and run parameter sweeps.
//!
//! Exit codes: 0 success, 2 infeasible (or, for `validate`, violations
//! found), 3 search budget exhausted, 4 invalid input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use clap::{Args, Parser, Subcommand};

use cloudlet_planner::model::{validate, Solution};
use cloudlet_planner::report::{self, Format};
use cloudlet_planner::scenario::{load_scenario, make_scenario, save_scenario};
use cloudlet_planner::solver::solve;
use cloudlet_planner::{EnergyParams, Label, PlanReport, Scenario, SolveStatus, SolverConfig, SolverMode};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_INVALID: u8 = 4;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "CLOUDLET_PLAN_OUT";

#[derive(Parser)]
#[command(name = "cloudlet-plan", version, about = "Cost-minimal cloudlet placement over passive optical access networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a stochastic scenario.
    Gen(GenArgs),
    /// Solve a scenario and write the solution and report.
    Plan(PlanArgs),
    /// Check a solution file against its scenario.
    Validate(ValidateArgs),
    /// Plan every combination of labels, split ratios, budgets and seeds.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    label: Label,
    #[arg(long, default_value_t = 4)]
    split: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Latency budget stored in the scenario (e.g. 10ms, 0.01, 500us).
    #[arg(long, value_parser = parse_duration)]
    dqos: Option<f64>,
    /// Output directory [default: $CLOUDLET_PLAN_OUT or ./out].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long)]
    mode: Option<SolverMode>,
    #[arg(long)]
    node_budget: Option<u64>,
    /// Seconds.
    #[arg(long)]
    time_budget: Option<f64>,
    /// TOML file with solver settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    /// Scenario file. Mutually exclusive with --label.
    #[arg(long, conflicts_with_all = ["label", "split", "seed"])]
    scenario: Option<PathBuf>,
    #[arg(long, required_unless_present = "scenario")]
    label: Option<Label>,
    #[arg(long)]
    split: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_duration)]
    dqos: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    /// JSON file with equipment power figures; enables the energy column.
    #[arg(long)]
    energy_params: Option<PathBuf>,
    /// Record solver wall time in the solution file.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    solution: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "urban,suburban,rural")]
    labels: Vec<Label>,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    splits: Vec<u32>,
    #[arg(long, value_delimiter = ',', value_parser = parse_duration, default_value = "1ms,10ms,100ms")]
    dqos: Vec<f64>,
    /// Seed list or range, e.g. `1,2,3` or `1-5`.
    #[arg(long, default_value = "1", value_parser = parse_seeds)]
    seeds: SeedList,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    energy_params: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct SeedList(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let a: u64 = a.trim().parse().map_err(|e| format!("bad seed `{a}`: {e}"))?;
            let b: u64 = b.trim().parse().map_err(|e| format!("bad seed `{b}`: {e}"))?;
            if a > b {
                return Err(format!("empty seed range `{part}`"));
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|e| format!("bad seed `{part}`: {e}"))?);
        }
    }
    if out.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(SeedList(out))
}

/// Parses a duration in seconds; `s`, `ms` and `us` suffixes are accepted.
fn parse_duration(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let (num, scale) = if let Some(v) = t.strip_suffix("ms") {
        (v, 1e-3)
    } else if let Some(v) = t.strip_suffix("us") {
        (v, 1e-6)
    } else if let Some(v) = t.strip_suffix('s') {
        (v, 1.0)
    } else {
        (t, 1.0)
    };
    let v: f64 = num.trim().parse().map_err(|_| format!("invalid duration `{s}`"))?;
    let v = v * scale;
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("duration must be positive, got `{s}`"));
    }
    Ok(v)
}

/// Error carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.to_string(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn out_dir(flag: Option<PathBuf>) -> Result<PathBuf, Failure> {
    let dir = flag
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|e| Failure::invalid(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display())))
}

fn solver_config(args: &SolverArgs) -> Result<SolverConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?
        }
        None => SolverConfig::default(),
    };
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(n) = args.node_budget {
        cfg.node_budget = n;
    }
    if let Some(t) = args.time_budget {
        cfg.time_budget_s = t;
    }
    cfg.validate().map_err(Failure::invalid)?;
    Ok(cfg)
}

fn energy(path: &Option<PathBuf>) -> Result<Option<EnergyParams>, Failure> {
    path.as_ref()
        .map(|p| EnergyParams::load(p).map_err(|e| Failure::invalid(format!("{}: {e}", p.display()))))
        .transpose()
}

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Optimal | SolveStatus::Feasible => 0,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::BudgetExhausted => EXIT_BUDGET,
    }
}

fn cmd_gen(args: GenArgs) -> CmdResult {
    let mut scenario = make_scenario(args.label, args.split, args.seed).map_err(Failure::invalid)?;
    if let Some(d) = args.dqos {
        scenario = scenario.with_d_qos(d).map_err(Failure::invalid)?;
    }
    let dir = out_dir(args.out)?;
    let path = dir.join(format!("scenario-{}-{}-{}.json", args.label, args.split, args.seed));
    save_scenario(&scenario, &path).map_err(Failure::invalid)?;
    println!(
        "{}: {} ONUs, {} RNs, {} field sites, {} COs",
        path.display(),
        scenario.num_onu(),
        scenario.num_rn(),
        scenario.num_field(),
        scenario.num_co()
    );
    Ok(0)
}

fn cmd_plan(args: PlanArgs) -> CmdResult {
    let cfg = solver_config(&args.solver)?;
    let energy = energy(&args.energy_params)?;
    let mut scenario = match (&args.scenario, args.label) {
        (Some(path), _) => load_scenario(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?,
        (None, Some(label)) => {
            make_scenario(label, args.split.unwrap_or(4), args.seed.unwrap_or(1)).map_err(Failure::invalid)?
        }
        (None, None) => return Err(Failure::invalid("either --scenario or --label is required")),
    };
    if let Some(d) = args.dqos {
        scenario = scenario.with_d_qos(d).map_err(Failure::invalid)?;
    }

    let result = solve(&scenario, &cfg).map_err(Failure::invalid)?;
    let solution = Solution::from_result(&result, &scenario, args.timing);
    let report = PlanReport::build(&result, &scenario, energy.as_ref()).map_err(Failure::invalid)?;

    let dir = out_dir(args.out)?;
    write(&dir.join("scenario.json"), &scenario.to_json().map_err(Failure::invalid)?)?;
    write(&dir.join("solution.json"), &solution.to_json().map_err(Failure::invalid)?)?;
    write(&dir.join("report.json"), &report.to_json().map_err(Failure::invalid)?)?;

    match result.total_cost() {
        Some(c) => println!(
            "{}: cost {c:.6}, {} cloudlets, {} nodes",
            result.status,
            solution.open_sites.len(),
            result.nodes_explored
        ),
        None => println!(
            "{}: {}",
            result.status,
            result.reason.as_deref().unwrap_or("no placement")
        ),
    }
    Ok(status_code(result.status))
}

fn cmd_validate(args: ValidateArgs) -> CmdResult {
    let scenario =
        load_scenario(&args.scenario).map_err(|e| Failure::invalid(format!("{}: {e}", args.scenario.display())))?;
    let text = std::fs::read_to_string(&args.solution)
        .map_err(|e| Failure::invalid(format!("{}: {e}", args.solution.display())))?;
    let solution = Solution::from_json(&text).map_err(|e| Failure::invalid(format!("{}: {e}", args.solution.display())))?;
    if solution.scenario_ref != scenario.digest() {
        return Err(Failure::invalid("solution was produced for a different scenario"));
    }
    if !solution.status.decision_expected() {
        println!("no placement to check (status {})", solution.status);
        return Ok(status_code(solution.status));
    }
    let (decision, mut violations) = solution.to_decision(&scenario).map_err(Failure::invalid)?;
    violations.extend(validate(&decision, &scenario));
    let cost_ok = solution.cost_matches(&decision, &scenario);
    for v in &violations {
        println!("{v}");
    }
    if !cost_ok {
        println!("cost: stored breakdown does not match the placement");
    }
    if violations.is_empty() && cost_ok {
        println!("ok: no violations");
        Ok(0)
    } else {
        println!("{} violation(s)", violations.len() + usize::from(!cost_ok));
        Ok(EXIT_INFEASIBLE)
    }
}

fn cmd_sweep(args: SweepArgs) -> CmdResult {
    let cfg = solver_config(&args.solver)?;
    let energy = energy(&args.energy_params)?;
    if args.jobs == 0 {
        return Err(Failure::invalid("--jobs must be at least 1"));
    }
    let mut cells = Vec::new();
    for &label in &args.labels {
        for &split in &args.splits {
            for &seed in &args.seeds.0 {
                cells.push((label, split, seed));
            }
        }
    }

    let run_cell = |&(label, split, seed): &(Label, u32, u64)| -> Result<Vec<PlanReport>, String> {
        let base = make_scenario(label, split, seed).map_err(|e| e.to_string())?;
        let mut out = Vec::new();
        for &d in &args.dqos {
            let s: Scenario = base.with_d_qos(d).map_err(|e| e.to_string())?;
            let r = solve(&s, &cfg).map_err(|e| e.to_string())?;
            out.push(PlanReport::build(&r, &s, energy.as_ref()).map_err(|e| e.to_string())?);
        }
        Ok(out)
    };

    let chunk = cells.len().div_ceil(args.jobs).max(1);
    let results: Vec<Result<Vec<PlanReport>, String>> = thread::scope(|scope| {
        let handles: Vec<_> = cells
            .chunks(chunk)
            .map(|part| scope.spawn(|| part.iter().map(run_cell).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let mut reports = Vec::new();
    for r in results {
        reports.extend(r.map_err(Failure::invalid)?);
    }
    report::sort_reports(&mut reports);

    let dir = out_dir(args.out)?;
    report::emit(&reports, Format::Csv, dir.join("sweep.csv")).map_err(Failure::invalid)?;
    report::emit(&reports, Format::Json, dir.join("sweep.json")).map_err(Failure::invalid)?;
    println!("{} rows written to {}", reports.len(), dir.join("sweep.csv").display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
