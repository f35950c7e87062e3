//! Preset sweeps that regenerate the evaluation figures as plot-ready CSV.
//!
//! Every table carries the reactive value next to the proactive bound on
//! each row, so `reactive >= bound` can be checked row by row.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{ChannelModel, CostFunction, DemandModel, Scenario};
use crate::policy::{compile_ti, compile_tv, PolicyTable};
use crate::sim::{self, SimConfig, SimResult};
use crate::solver::{self, BoundModel, Problem, SolverOptions};

/// Probability of the bad state `g = 0.5` at each slot of the period.
pub const FIG7_PROFILE: [f64; 14] = [
    0.8, 0.9, 0.12, 0.24, 0.89, 0.64, 0.9, 0.11, 0.2, 0.27, 0.89, 0.70, 0.59, 0.14,
];
pub const FIG8_PROFILE: [f64; 14] = [
    0.4, 0.55, 0.7, 0.8, 0.9, 0.7, 0.55, 0.4, 0.25, 0.36, 0.53, 0.67, 0.7, 0.78,
];
pub const FIG6_WINDOWS: [usize; 12] = [1, 2, 5, 10, 20, 30, 40, 50, 60, 70, 80, 100];
pub const FIG7_WINDOWS: [usize; 13] = [1, 5, 10, 14, 20, 28, 40, 42, 56, 70, 80, 84, 112];
pub const FIG8_WINDOWS: [usize; 3] = [14, 168, 672];

const TWO_USER_DEMAND: f64 = 0.42;
const TWO_USER_GAINS: [f64; 2] = [0.5, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Fig4, Preset::Fig5, Preset::Fig6, Preset::Fig7, Preset::Fig8];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::Fig8 => "fig8",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown preset `{s}` (expected fig4..fig8)")))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One user, `S = 1`, quartic cost, two channel states. Equal gains are
/// merged into a single state.
pub fn single_user(pi: f64, gains: [f64; 2], psi_bad: f64) -> Scenario {
    let channel = if gains[0] == gains[1] {
        ChannelModel::symmetric(1, &gains[..1], &[vec![1.0]])
    } else {
        ChannelModel::symmetric(1, &gains, &[vec![psi_bad, 1.0 - psi_bad]])
    };
    Scenario::new(1.0, DemandModel::independent(vec![pi]), channel, CostFunction::default())
}

/// Two identical users with the given per-slot bad-state probabilities.
pub fn two_user(profile: &[f64]) -> Scenario {
    let per_slot: Vec<Vec<f64>> = profile.iter().map(|&p| vec![p, 1.0 - p]).collect();
    Scenario::new(
        1.0,
        DemandModel::independent(vec![TWO_USER_DEMAND; 2]),
        ChannelModel::symmetric(2, &TWO_USER_GAINS, &per_slot),
        CostFunction::default(),
    )
}

pub fn fig6_scenario() -> Scenario {
    two_user(&[0.54])
}

pub fn fig7_scenario() -> Scenario {
    two_user(&FIG7_PROFILE)
}

pub fn fig8_scenario() -> Scenario {
    two_user(&FIG8_PROFILE)
}

/// The same scenario with its channel statistics averaged over the period.
pub fn time_averaged(profile: &[f64]) -> Scenario {
    let mean = profile.iter().sum::<f64>() / profile.len() as f64;
    two_user(&[mean])
}

/// Bound model for a window on a period-`Q` scenario: the uniform-weight
/// program when `T` is a multiple of `Q`, the general one otherwise.
pub fn bound_model_for(window: usize, period: usize) -> BoundModel {
    if period == 1 {
        BoundModel::TimeInvariant
    } else if window.is_multiple_of(period) {
        BoundModel::TimeVarying
    } else {
        BoundModel::General { window }
    }
}

/// Solves the matching bound and compiles the corresponding policy.
pub fn proactive_policy(
    scenario: &Scenario,
    window: usize,
    opts: &SolverOptions,
) -> Result<(solver::LowerBoundSolution, PolicyTable)> {
    let q = scenario.period();
    let model = bound_model_for(window, q);
    let sol = solver::solve(model, scenario, opts)?;
    let policy = if q == 1 {
        compile_ti(&sol, window, scenario.users())?
    } else {
        compile_tv(&sol, window, q, scenario.users())?
    };
    Ok((sol, policy))
}

#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    pub horizon: usize,
    pub replications: usize,
    pub seed: u64,
    pub solver: SolverOptions,
    /// Overrides the preset's window grid.
    pub windows: Option<Vec<usize>>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            horizon: 10_000,
            replications: 40,
            seed: 1,
            solver: SolverOptions::default(),
            windows: None,
        }
    }
}

impl ExperimentOptions {
    fn sim(&self, record_per_period: bool) -> SimConfig {
        SimConfig {
            horizon: self.horizon,
            replications: self.replications,
            seed: self.seed,
            burn_in: None,
            record_per_period,
        }
    }
}

/// One CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<String>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].clone()).collect())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

fn f(x: f64) -> String {
    format!("{x}")
}

pub fn run_preset(preset: Preset, opts: &ExperimentOptions) -> Result<Vec<CsvTable>> {
    match preset {
        Preset::Fig4 => fig4(opts).map(|t| vec![t]),
        Preset::Fig5 => fig5(opts),
        Preset::Fig6 => fig6(opts).map(|t| vec![t]),
        Preset::Fig7 => fig7(opts).map(|t| vec![t]),
        Preset::Fig8 => fig8(opts),
    }
}

/// Runs a preset and writes its tables under `dir`.
pub fn write_preset(preset: Preset, opts: &ExperimentOptions, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    run_preset(preset, opts)?.iter().map(|t| t.write(dir)).collect()
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Analytic surface over `(π̄, ψ)` with `g = (1, 2)`.
pub fn fig4(opts: &ExperimentOptions) -> Result<CsvTable> {
    let mut t = CsvTable::new("fig4", &["pi_bar", "psi_bad", "reactive", "bound_ti"]);
    for pi in grid(0.0, 1.0, 11) {
        for psi in grid(0.0, 1.0, 11) {
            let s = single_user(pi, [1.0, 2.0], psi);
            let bound = solver::solve(BoundModel::TimeInvariant, &s, &opts.solver)?.bound;
            t.push(vec![f(pi), f(psi), f(sim::reactive_cost(&s)?), f(bound)]);
        }
    }
    Ok(t)
}

pub const FIG5_PSI: [f64; 3] = [0.3, 0.7, 1.0];

/// Analytic curves over `g^(2) ∈ [1, 4]` with `π̄ = 0.5`, `g^(1) = 1`, one
/// table per `ψ`.
pub fn fig5(opts: &ExperimentOptions) -> Result<Vec<CsvTable>> {
    FIG5_PSI
        .iter()
        .map(|&psi| {
            let mut t = CsvTable::new(format!("fig5_psi{psi}"), &["g2", "psi_bad", "reactive", "bound_ti"]);
            for g2 in grid(1.0, 4.0, 13) {
                let s = single_user(0.5, [1.0, g2], psi);
                let bound = solver::solve(BoundModel::TimeInvariant, &s, &opts.solver)?.bound;
                t.push(vec![f(g2), f(psi), f(sim::reactive_cost(&s)?), f(bound)]);
            }
            Ok(t)
        })
        .collect()
}

const SWEEP_HEADER: [&str; 9] = [
    "T",
    "model",
    "reactive",
    "bound",
    "bound_ti",
    "proactive_mean",
    "proactive_stderr",
    "reactive_sim_mean",
    "reactive_sim_stderr",
];

fn sweep(
    name: &str,
    scenario: &Scenario,
    averaged: &Scenario,
    windows: &[usize],
    opts: &ExperimentOptions,
) -> Result<CsvTable> {
    let mut t = CsvTable::new(name, &SWEEP_HEADER);
    let reactive = sim::reactive_cost(scenario)?;
    let bound_ti = solver::solve(BoundModel::TimeInvariant, averaged, &opts.solver)?.bound;
    let reactive_sim = sim::run(
        scenario,
        &PolicyTable::reactive(scenario.users(), scenario.service_size),
        &opts.sim(false),
    )?;
    for &w in windows {
        let (sol, policy) = proactive_policy(scenario, w, &opts.solver)?;
        let r = sim::run(scenario, &policy, &opts.sim(false))?;
        t.push(vec![
            w.to_string(),
            sol.model.name().to_string(),
            f(reactive),
            f(sol.bound),
            f(bound_ti),
            f(r.cost.mean),
            f(r.cost.stderr),
            f(reactive_sim.cost.mean),
            f(reactive_sim.cost.stderr),
        ]);
    }
    Ok(t)
}

/// Simulated `℘_U` cost against `c_U` over the window grid.
pub fn fig6(opts: &ExperimentOptions) -> Result<CsvTable> {
    let s = fig6_scenario();
    let windows = opts.windows.clone().unwrap_or_else(|| FIG6_WINDOWS.to_vec());
    sweep("fig6", &s, &s, &windows, opts)
}

/// Simulated `℘_F` cost against the window's bound on the first `Q = 14`
/// profile.
pub fn fig7(opts: &ExperimentOptions) -> Result<CsvTable> {
    let windows = opts.windows.clone().unwrap_or_else(|| FIG7_WINDOWS.to_vec());
    sweep("fig7", &fig7_scenario(), &time_averaged(&FIG7_PROFILE), &windows, opts)
}

/// Per-period averages for the reactive policy and `℘_F` at each window.
pub struct PeriodRun {
    pub window: usize,
    pub solution: solver::LowerBoundSolution,
    pub result: SimResult,
    /// Stationary per-period cost and load implied by the solution.
    pub implied_cost: Vec<f64>,
    pub implied_load: Vec<f64>,
}

pub fn fig8_runs(opts: &ExperimentOptions) -> Result<(SimResult, Vec<PeriodRun>)> {
    let s = fig8_scenario();
    let reactive = sim::run(
        &s,
        &PolicyTable::reactive(s.users(), s.service_size),
        &opts.sim(true),
    )?;
    let windows = opts.windows.clone().unwrap_or_else(|| FIG8_WINDOWS.to_vec());
    let runs = windows
        .iter()
        .map(|&w| {
            let (solution, policy) = proactive_policy(&s, w, &opts.solver)?;
            let problem = Problem::new(&s, solution.model)?;
            let values = solution.mu.values();
            Ok(PeriodRun {
                window: w,
                implied_cost: problem.per_period_cost(values)?,
                implied_load: problem.per_period_load(values)?,
                result: sim::run(&s, &policy, &opts.sim(true))?,
                solution,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((reactive, runs))
}

pub fn fig8(opts: &ExperimentOptions) -> Result<Vec<CsvTable>> {
    let s = fig8_scenario();
    let (reactive, runs) = fig8_runs(opts)?;
    let reactive_levels = sim::reactive_cost_per_period(&s)?;
    let mut t = CsvTable::new(
        "fig8_per_period",
        &[
            "policy",
            "T",
            "s",
            "psi_bad",
            "cost_mean",
            "cost_stderr",
            "load_mean",
            "load_stderr",
            "reactive_level",
            "bound_cost_level",
            "bound_load_level",
        ],
    );
    let q = s.period();
    let rp = reactive.per_period_profile()?;
    for i in 0..q {
        t.push(vec![
            "reactive".into(),
            "0".into(),
            i.to_string(),
            f(FIG8_PROFILE[i]),
            f(rp.cost[i].mean),
            f(rp.cost[i].stderr),
            f(rp.load[i].mean),
            f(rp.load[i].stderr),
            f(reactive_levels[i]),
            String::new(),
            String::new(),
        ]);
    }
    let mut summary = CsvTable::new("fig8_summary", &["T", "model", "reactive", "bound", "proactive_mean", "proactive_stderr"]);
    let reactive_avg = sim::reactive_cost(&s)?;
    for run in &runs {
        let p = run.result.per_period_profile()?;
        for i in 0..q {
            t.push(vec![
                "proactive_tv".into(),
                run.window.to_string(),
                i.to_string(),
                f(FIG8_PROFILE[i]),
                f(p.cost[i].mean),
                f(p.cost[i].stderr),
                f(p.load[i].mean),
                f(p.load[i].stderr),
                f(reactive_levels[i]),
                f(run.implied_cost[i]),
                f(run.implied_load[i]),
            ]);
        }
        summary.push(vec![
            run.window.to_string(),
            run.solution.model.name().to_string(),
            f(reactive_avg),
            f(run.solution.bound),
            f(run.result.cost.mean),
            f(run.result.cost.stderr),
        ]);
    }
    Ok(vec![t, summary])
}

/// Coefficient of variation (population standard deviation over mean).
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}
