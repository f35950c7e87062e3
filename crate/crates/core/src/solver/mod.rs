//! Global lower bounds on the proactive scheduling cost.
//!
//! Each bound is the minimum of a smooth convex objective over a box of
//! `μ̃` tables (see [`objective`]). [`solve`] runs projected gradient descent
//! from the box midpoint; [`brute_force_bound`] is an exhaustive grid search
//! used to cross-check it on small instances.

pub mod objective;
mod oracle;
pub mod pgd;

pub use objective::{
    objective_ti, objective_tv, objective_tv_general, uniform_weights, window_weights, BoundModel,
    Problem,
};
pub use oracle::{brute_force_bound, ORACLE_MAX_DIM};

use crate::error::{Error, Result};
use crate::model::Scenario;

/// `μ̃_n(B, g)`, flat in user-major, then bitmask, then channel index order.
#[derive(Debug, Clone, PartialEq)]
pub struct MuTableTi {
    pub users: usize,
    pub subsets: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl MuTableTi {
    pub fn zeros(users: usize, subsets: usize, channels: usize) -> Self {
        Self {
            users,
            subsets,
            channels,
            values: vec![0.0; users * subsets * channels],
        }
    }

    #[inline]
    pub fn index(&self, user: usize, mask: usize, channel: usize) -> usize {
        (user * self.subsets + mask) * self.channels + channel
    }

    pub fn get(&self, user: usize, mask: usize, channel: usize) -> f64 {
        self.values[self.index(user, mask, channel)]
    }
}

/// `μ̃_n(B, g, s, s')`, flat in user-major, bitmask, channel index, `s`, `s'`
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct MuTableTv {
    pub users: usize,
    pub subsets: usize,
    pub channels: usize,
    pub period: usize,
    pub values: Vec<f64>,
}

impl MuTableTv {
    pub fn zeros(users: usize, subsets: usize, channels: usize, period: usize) -> Self {
        Self {
            users,
            subsets,
            channels,
            period,
            values: vec![0.0; users * subsets * channels * period * period],
        }
    }

    #[inline]
    pub fn index(&self, user: usize, mask: usize, channel: usize, s: usize, target: usize) -> usize {
        (((user * self.subsets + mask) * self.channels + channel) * self.period + s) * self.period
            + target
    }

    pub fn get(&self, user: usize, mask: usize, channel: usize, s: usize, target: usize) -> f64 {
        self.values[self.index(user, mask, channel, s, target)]
    }

    /// Copies a time-invariant table into every `(s, s')` pair.
    pub fn broadcast(ti: &MuTableTi, period: usize) -> Self {
        let mut out = Self::zeros(ti.users, ti.subsets, ti.channels, period);
        for n in 0..ti.users {
            for b in 0..ti.subsets {
                for g in 0..ti.channels {
                    for s in 0..period {
                        for t in 0..period {
                            let i = out.index(n, b, g, s, t);
                            out.values[i] = ti.get(n, b, g);
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MuTable {
    Ti(MuTableTi),
    Tv(MuTableTv),
}

impl MuTable {
    pub fn values(&self) -> &[f64] {
        match self {
            MuTable::Ti(t) => &t.values,
            MuTable::Tv(t) => &t.values,
        }
    }

    pub fn users(&self) -> usize {
        match self {
            MuTable::Ti(t) => t.users,
            MuTable::Tv(t) => t.users,
        }
    }

    pub fn subsets(&self) -> usize {
        match self {
            MuTable::Ti(t) => t.subsets,
            MuTable::Tv(t) => t.subsets,
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            MuTable::Ti(t) => t.channels,
            MuTable::Tv(t) => t.channels,
        }
    }

    /// 1 for time-invariant tables.
    pub fn period(&self) -> usize {
        match self {
            MuTable::Ti(_) => 1,
            MuTable::Tv(t) => t.period,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Bound on `‖μ̃ − P(μ̃ − ∇f)‖₂` at termination.
    pub tolerance: f64,
    pub initial_step: f64,
    /// Backtracking factor in `(0, 1)`.
    pub shrink: f64,
    /// Starting value for free entries; `None` means `S/2`.
    pub init: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            tolerance: 1e-9,
            initial_step: 1.0,
            shrink: 0.5,
            init: None,
        }
    }
}

impl SolverOptions {
    pub fn check(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidArgument("shrink factor must lie in (0, 1)".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max iterations must be at least 1".into()));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::InvalidArgument("initial step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub projected_gradient_norm: f64,
    pub converged: bool,
    /// Line search could not make progress before the tolerance was met.
    pub stalled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundSolution {
    pub model: BoundModel,
    pub service_size: f64,
    pub mu: MuTable,
    pub bound: f64,
    pub diagnostics: SolverDiagnostics,
}

struct Adapter<'p, 'a>(&'p Problem<'a>);

impl pgd::BoxObjective for Adapter<'_, '_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x).expect("dimension checked by the solver")
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.0
            .gradient(x, out)
            .expect("dimension checked by the solver")
    }
}

/// Minimizes the selected lower-bound objective.
///
/// Non-convergence is not an error: the best iterate is returned with
/// `diagnostics.converged == false`.
pub fn solve(model: BoundModel, scenario: &Scenario, opts: &SolverOptions) -> Result<LowerBoundSolution> {
    opts.check()?;
    let problem = Problem::new(scenario, model)?;
    solve_problem(&problem, model, opts)
}

pub fn solve_problem(problem: &Problem<'_>, model: BoundModel, opts: &SolverOptions) -> Result<LowerBoundSolution> {
    opts.check()?;
    let pinned = problem.pinned();
    let min = pgd::minimize(&Adapter(problem), problem.service_size(), &pinned, opts);
    let bound = problem.value(&min.x)?;
    let (users, subsets, channels) = (problem.users(), problem.subsets(), problem.channels());
    let mu = if problem.is_time_invariant() {
        MuTable::Ti(MuTableTi {
            users,
            subsets,
            channels,
            values: min.x,
        })
    } else {
        MuTable::Tv(MuTableTv {
            users,
            subsets,
            channels,
            period: problem.period(),
            values: min.x,
        })
    };
    Ok(LowerBoundSolution {
        model,
        service_size: problem.service_size(),
        mu,
        bound,
        diagnostics: min.diagnostics,
    })
}

/// Objective value at `μ̃ ≡ 0`, the reactive operating point.
pub fn reactive_objective(model: BoundModel, scenario: &Scenario) -> Result<f64> {
    let problem = Problem::new(scenario, model)?;
    problem.value(&vec![0.0; problem.dim()])
}
