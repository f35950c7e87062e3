use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use proactive_core::config::{load_scenario, Format, ScenarioConfig};
use proactive_core::experiments::{self, ExperimentOptions, Preset};
use proactive_core::model::Scenario;
use proactive_core::policy::{compile_ti, compile_tv, PolicyKind, PolicyTable};
use proactive_core::sim::{self, SimConfig};
use proactive_core::solver::{self, BoundModel, LowerBoundSolution, SolverOptions};
use proactive_core::table_file;
use proactive_core::trace::{self, QuantizerThresholds, Slotting};
use proactive_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

/// Proactive scheduling bounds, policies and simulation.
#[derive(Parser, Debug)]
#[command(name = "proactive", version)]
struct Cli {
    /// Directory for outputs written without an explicit path.
    #[arg(long, global = true, env = "PROACTIVE_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a lower-bound program and write the optimal table.
    Bound(BoundArgs),
    /// Simulate a policy and write averaged results as CSV.
    Simulate(SimulateArgs),
    /// Regenerate a figure preset as CSV files.
    Experiment(ExperimentArgs),
    /// Turn an RSRP trace into a per-slot channel profile.
    Ingest(IngestArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Ti,
    Tv,
    TvGeneral,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Reactive,
    ProactiveTi,
    ProactiveTv,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Stop when the projected gradient norm falls below this value.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.tol,
            max_iterations: self.max_iter,
            ..Default::default()
        }
    }
}

#[derive(Args, Debug)]
struct BoundArgs {
    /// Scenario file (TOML, or JSON with a .json extension).
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "ti")]
    model: ModelArg,
    /// Proactive window; required for tv-general.
    #[arg(long = "T", short = 'T')]
    window: Option<usize>,
    /// Solution file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    scenario: PathBuf,
    #[arg(long, value_enum)]
    policy: PolicyArg,
    /// Proactive window; required for proactive policies.
    #[arg(long = "T", short = 'T')]
    window: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    horizon: usize,
    #[arg(long, default_value_t = 40)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Slots dropped from the averages; defaults to the window.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Use a solution file written by `bound` instead of solving.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Results CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-period averages to this CSV.
    #[arg(long)]
    per_period: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// fig4, fig5, fig6, fig7, fig8 or all.
    preset: String,
    /// Output directory; defaults to --out-dir.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    horizon: usize,
    #[arg(long, default_value_t = 40)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated window grid replacing the preset's.
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// CSV with columns pass_id,timestamp_s[,distance_m],rsrp_dbm.
    trace: PathBuf,
    /// Slot length in seconds, counted from each pass's first sample
    #[arg(long, conflicts_with = "slot_meters", required_unless_present = "slot_meters")]
    slot_seconds: Option<f64>,
    /// Slot length in meters along the distance_m column
    #[arg(long)]
    slot_meters: Option<f64>,
    /// Number of slots per period.
    #[arg(long)]
    period: usize,
    /// Decreasing dBm cut points between states.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    thresholds: Option<Vec<f64>>,
    /// Gains per state, worst first; with --users and --demand writes a
    /// complete scenario instead of a fragment.
    #[arg(long, value_delimiter = ',')]
    gains: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    users: usize,
    /// Request probability per user and slot
    #[arg(long)]
    demand: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Bound(a) => cmd_bound(a, &cli.out_dir),
        Command::Simulate(a) => cmd_simulate(a, &cli.out_dir),
        Command::Experiment(a) => cmd_experiment(a, &cli.out_dir),
        Command::Ingest(a) => cmd_ingest(a, &cli.out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn output_path(explicit: &Option<PathBuf>, out_dir: &Path, default_name: &str) -> Result<PathBuf, Failure> {
    let path = match explicit {
        Some(p) => p.clone(),
        None => out_dir.join(default_name),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(Error::from)?;
    }
    Ok(path)
}

fn bound_model(model: ModelArg, window: Option<usize>, scenario: &Scenario) -> Result<BoundModel, Failure> {
    match model {
        ModelArg::Ti => Ok(BoundModel::TimeInvariant),
        ModelArg::Tv => {
            if let Some(t) = window {
                if t % scenario.period() != 0 {
                    return Err(usage(format!(
                        "--T {t} is not a multiple of the period {}; use --model tv-general",
                        scenario.period()
                    )));
                }
            }
            Ok(BoundModel::TimeVarying)
        }
        ModelArg::TvGeneral => match window {
            Some(t) if t > 0 => Ok(BoundModel::General { window: t }),
            _ => Err(usage("--model tv-general requires --T >= 1")),
        },
    }
}

fn not_converged(sol: &LowerBoundSolution) -> Failure {
    Failure {
        code: EXIT_NOT_CONVERGED,
        message: format!(
            "solver did not converge after {} iterations (projected gradient norm {:e})",
            sol.diagnostics.iterations, sol.diagnostics.projected_gradient_norm
        ),
    }
}

fn cmd_bound(a: &BoundArgs, out_dir: &Path) -> Result<(), Failure> {
    let scenario = load_scenario(&a.scenario)?;
    let model = bound_model(a.model, a.window, &scenario)?;
    let sol = solver::solve(model, &scenario, &a.solver.options())?;
    let path = output_path(&a.out, out_dir, &format!("bound_{}.table", model.name()))?;
    table_file::write_solution(&path, &sol)?;
    let d = &sol.diagnostics;
    println!("model       {}", model.name());
    if let BoundModel::General { window } = model {
        println!("window      {window}");
    }
    println!("bound       {}", sol.bound);
    println!("reactive    {}", sim::reactive_cost(&scenario)?);
    println!("iterations  {}", d.iterations);
    println!("pg_norm     {:e}", d.projected_gradient_norm);
    println!("converged   {}", d.converged);
    println!("solution    {}", path.display());
    if d.converged {
        Ok(())
    } else {
        Err(not_converged(&sol))
    }
}

fn compile_policy(a: &SimulateArgs, scenario: &Scenario) -> Result<(PolicyTable, Option<f64>), Failure> {
    let kind = match a.policy {
        PolicyArg::Reactive => return Ok((PolicyTable::reactive(scenario.users(), scenario.service_size), None)),
        PolicyArg::ProactiveTi => PolicyKind::ProactiveTi,
        PolicyArg::ProactiveTv => PolicyKind::ProactiveTv,
    };
    let window = match a.window {
        Some(t) if t > 0 => t,
        _ => return Err(usage("--T >= 1 is required for proactive policies")),
    };
    let q = scenario.period();
    let sol = match &a.solution {
        Some(p) => table_file::read_solution(p)?,
        None => {
            let model = match (kind, experiments::bound_model_for(window, q)) {
                (PolicyKind::ProactiveTi, _) => BoundModel::TimeInvariant,
                (_, BoundModel::TimeInvariant) => BoundModel::TimeVarying,
                (_, m) => m,
            };
            solver::solve(model, scenario, &a.solver.options())?
        }
    };
    if !sol.diagnostics.converged {
        return Err(not_converged(&sol));
    }
    let table = match kind {
        PolicyKind::ProactiveTi => compile_ti(&sol, window, scenario.users())?,
        _ => compile_tv(&sol, window, q, scenario.users())?,
    };
    Ok((table, Some(sol.bound)))
}

fn cmd_simulate(a: &SimulateArgs, out_dir: &Path) -> Result<(), Failure> {
    let scenario = load_scenario(&a.scenario)?;
    let (policy, bound) = compile_policy(a, &scenario)?;
    let config = SimConfig {
        horizon: a.horizon,
        replications: a.reps,
        seed: a.seed,
        burn_in: a.burn_in,
        record_per_period: a.per_period.is_some(),
    };
    let r = sim::run(&scenario, &policy, &config)?;
    let name = policy.kind.name();
    let path = output_path(&a.out, out_dir, &format!("simulate_{name}.csv"))?;
    let run_id = format!("{name}-T{}-seed{}", policy.window, a.seed);

    let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
    let mut header: Vec<String> = [
        "run_id", "policy", "T", "t_max", "reps", "seed", "burn_in", "mean_cost", "stderr_cost",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for n in 0..scenario.users() {
        header.push(format!("mean_load_user_{n}"));
        header.push(format!("stderr_load_user_{n}"));
    }
    header.extend(["bound".to_string(), "reactive".to_string(), "audit_violations".to_string()]);
    w.write_record(&header).map_err(Error::from)?;
    let mut row = vec![
        run_id.clone(),
        name.to_string(),
        policy.window.to_string(),
        a.horizon.to_string(),
        a.reps.to_string(),
        a.seed.to_string(),
        r.burn_in.to_string(),
        r.cost.mean.to_string(),
        r.cost.stderr.to_string(),
    ];
    for l in &r.load {
        row.push(l.mean.to_string());
        row.push(l.stderr.to_string());
    }
    row.push(bound.map(|b| b.to_string()).unwrap_or_default());
    row.push(sim::reactive_cost(&scenario)?.to_string());
    row.push(r.audit.violations.to_string());
    w.write_record(&row).map_err(Error::from)?;
    w.flush().map_err(Error::from)?;

    if a.per_period.is_some() {
        let profile = r.per_period_profile()?;
        let path = output_path(&a.per_period, out_dir, "per_period.csv")?;
        let mut w = csv::Writer::from_path(&path).map_err(Error::from)?;
        w.write_record(["run_id", "policy", "T", "s", "cost_mean", "cost_stderr", "load_mean", "load_stderr"])
            .map_err(Error::from)?;
        for (s, (c, l)) in profile.cost.iter().zip(&profile.load).enumerate() {
            w.write_record([
                run_id.clone(),
                name.to_string(),
                policy.window.to_string(),
                s.to_string(),
                c.mean.to_string(),
                c.stderr.to_string(),
                l.mean.to_string(),
                l.stderr.to_string(),
            ])
            .map_err(Error::from)?;
        }
        w.flush().map_err(Error::from)?;
    }

    println!("policy      {name}");
    println!("T           {}", policy.window);
    println!("cost        {} ± {}", r.cost.mean, r.cost.stderr);
    if let Some(b) = bound {
        println!("bound       {b}");
    }
    println!("results     {}", path.display());
    Ok(())
}

fn cmd_experiment(a: &ExperimentArgs, out_dir: &Path) -> Result<(), Failure> {
    let presets = if a.preset == "all" {
        Preset::ALL.to_vec()
    } else {
        vec![Preset::parse(&a.preset).map_err(|e| usage(e.to_string()))?]
    };
    let dir = a.out.clone().unwrap_or_else(|| out_dir.to_path_buf());
    let opts = ExperimentOptions {
        horizon: a.horizon,
        replications: a.reps,
        seed: a.seed,
        windows: a.windows.clone(),
        ..Default::default()
    };
    for p in presets {
        for path in experiments::write_preset(p, &opts, &dir)? {
            println!("{p}: {}", path.display());
        }
    }
    Ok(())
}

fn cmd_ingest(a: &IngestArgs, out_dir: &Path) -> Result<(), Failure> {
    let slotting = match (a.slot_seconds, a.slot_meters) {
        (Some(s), None) => Slotting::Time { slot_seconds: s },
        (None, Some(m)) => Slotting::Distance { slot_meters: m },
        _ => return Err(usage("give exactly one of --slot-seconds or --slot-meters")),
    };
    let thresholds = match &a.thresholds {
        Some(c) => QuantizerThresholds::new(c.clone())?,
        None => QuantizerThresholds::default(),
    };
    let parsed = trace::parse_trace(&a.trace)?;
    for w in &parsed.warnings {
        eprintln!("warning: {}:{}: {}", a.trace.display(), w.line, w.message);
    }
    let profile = trace::build_profile(&parsed.records, slotting, a.period, &thresholds)?;
    let text = match (&a.gains, a.demand) {
        (Some(gains), Some(pi)) => {
            let channel = profile.into_channel_model(a.users, gains)?;
            let scenario = Scenario::new(
                1.0,
                proactive_core::model::DemandModel::independent(vec![pi; a.users]),
                channel,
                Default::default(),
            );
            scenario.ensure_valid()?;
            let path_format = a.out.as_deref().map(Format::from_path).unwrap_or(Format::Toml);
            ScenarioConfig::from_scenario(&scenario)?.to_text(path_format)?
        }
        (None, None) => profile.to_config_fragment(),
        _ => return Err(usage("--gains and --demand go together")),
    };
    let path = output_path(&a.out, out_dir, "channel_profile.toml")?;
    std::fs::write(&path, text).map_err(Error::from)?;
    println!("records     {}", parsed.records.len());
    println!("skipped     {}", parsed.warnings.len());
    println!("per slot    {:?}", profile.counts);
    if !profile.interpolated.is_empty() {
        println!("interpolated {:?}", profile.interpolated);
    }
    println!("profile     {}", path.display());
    Ok(())
}
