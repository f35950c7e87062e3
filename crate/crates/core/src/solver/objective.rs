//! Lower-bound objectives over box-constrained `μ̃` tables, with analytic
//! gradients.
//!
//! Time-invariant cells are `(B, g)`; cyclo-stationary cells are
//! `(B, g, s, s')`. In both cases the load of user `n` in a cell is
//!
//! ```text
//! L_n = δ_{n∈B} (S − μ̄_n(s)) + Σ_{s'} W[s][s'] μ̃_n(B, g, s, s')
//! ```
//!
//! where `W[s][s']` is the share of the service window whose slot index is
//! `s'` when the current index is `s`. `W` is uniform (`1/Q`) when the window
//! is a whole number of periods, and in general
//! `W[s][s'] = #{τ ∈ 1..=T : (s + τ) mod Q = s'} / T`.

use crate::error::{Error, Result};
use crate::model::{CostFunction, Scenario};
use crate::stats::{contains, ChannelTable, DemandTable, Tables};

/// Which lower bound to optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundModel {
    /// Time-invariant channel statistics (`c_U`); a period greater than one
    /// is averaged out first.
    TimeInvariant,
    /// Cyclo-stationary statistics, window a whole number of periods (`c_F`).
    TimeVarying,
    /// Cyclo-stationary statistics for an arbitrary window length.
    General { window: usize },
}

impl BoundModel {
    pub fn name(&self) -> &'static str {
        match self {
            BoundModel::TimeInvariant => "ti",
            BoundModel::TimeVarying => "tv",
            BoundModel::General { .. } => "tv-general",
        }
    }
}

/// `W[s][s']` for a window that is a whole number of periods.
pub fn uniform_weights(period: usize) -> Vec<f64> {
    vec![1.0 / period as f64; period * period]
}

/// `W[s][s']` obtained by walking `τ = 1..=window` forward from `s`.
pub fn window_weights(period: usize, window: usize) -> Vec<f64> {
    let mut w = vec![0.0; period * period];
    let share = 1.0 / window as f64;
    for s in 0..period {
        for tau in 1..=window {
            w[s * period + (s + tau) % period] += share;
        }
    }
    w
}

/// Shared dimensions and probability tables of one optimization problem.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    cost: &'a CostFunction,
    service: f64,
    users: usize,
    subsets: usize,
    channels: usize,
    period: usize,
    demand: Vec<f64>,
    /// `P_c(g|s)`, row-major `[s][g]`.
    channel: Vec<f64>,
    gains: Vec<Vec<f64>>,
    /// `W[s][s']`, row-major. Unused for the time-invariant problem.
    weights: Vec<f64>,
    time_invariant: bool,
}

impl<'a> Problem<'a> {
    pub fn new(scenario: &'a Scenario, model: BoundModel) -> Result<Self> {
        let tables = Tables::build(scenario)?;
        Self::from_tables(scenario, &tables, model)
    }

    pub fn from_tables(scenario: &'a Scenario, tables: &Tables, model: BoundModel) -> Result<Self> {
        let (channel, time_invariant, weights): (ChannelTable, bool, Vec<f64>) = match model {
            BoundModel::TimeInvariant => (tables.channel.time_averaged(), true, vec![1.0]),
            BoundModel::TimeVarying => {
                let q = tables.channel.period();
                (tables.channel.clone(), false, uniform_weights(q))
            }
            BoundModel::General { window } => {
                if window == 0 {
                    return Err(Error::InvalidArgument("window must be at least 1".into()));
                }
                let q = tables.channel.period();
                (tables.channel.clone(), false, window_weights(q, window))
            }
        };
        Ok(Self::assemble(scenario, &tables.demand, &channel, weights, time_invariant))
    }

    fn assemble(
        scenario: &'a Scenario,
        demand: &DemandTable,
        channel: &ChannelTable,
        weights: Vec<f64>,
        time_invariant: bool,
    ) -> Self {
        let period = channel.period();
        Self {
            cost: &scenario.cost,
            service: scenario.service_size,
            users: scenario.users(),
            subsets: demand.len(),
            channels: channel.len(),
            period,
            demand: demand.probs().to_vec(),
            channel: (0..period).flat_map(|s| channel.slot(s).to_vec()).collect(),
            gains: channel.gain_vectors(),
            weights,
            time_invariant,
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn subsets(&self) -> usize {
        self.subsets
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Period of the cyclo-stationary problem; 1 for the time-invariant one.
    pub fn period(&self) -> usize {
        if self.time_invariant {
            1
        } else {
            self.period
        }
    }

    pub fn service_size(&self) -> f64 {
        self.service
    }

    pub fn is_time_invariant(&self) -> bool {
        self.time_invariant
    }

    pub fn dim(&self) -> usize {
        let q = self.period();
        let per_slot = if self.time_invariant { 1 } else { q * q };
        self.users * self.subsets * self.channels * per_slot
    }

    fn pc(&self, s: usize, g: usize) -> f64 {
        self.channel[s * self.channels + g]
    }

    fn w(&self, s: usize, t: usize) -> f64 {
        self.weights[s * self.period + t]
    }

    #[inline]
    fn ti_index(&self, n: usize, b: usize, g: usize) -> usize {
        (n * self.subsets + b) * self.channels + g
    }

    #[inline]
    fn tv_index(&self, n: usize, b: usize, g: usize, s: usize, t: usize) -> usize {
        (((n * self.subsets + b) * self.channels + g) * self.period + s) * self.period + t
    }

    /// Variables whose cell has zero probability or zero window weight.
    /// They do not affect the objective and are pinned to 0.
    pub fn pinned(&self) -> Vec<bool> {
        let mut out = vec![false; self.dim()];
        for n in 0..self.users {
            for b in 0..self.subsets {
                for g in 0..self.channels {
                    if self.time_invariant {
                        out[self.ti_index(n, b, g)] = self.demand[b] * self.pc(0, g) == 0.0;
                        continue;
                    }
                    for s in 0..self.period {
                        let p = self.demand[b] * self.pc(s, g);
                        for t in 0..self.period {
                            out[self.tv_index(n, b, g, s, t)] = p == 0.0 || self.w(s, t) == 0.0;
                        }
                    }
                }
            }
        }
        out
    }

    fn check_len(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "table has {} entries, problem has {}",
                mu.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Objective value at `mu`.
    pub fn value(&self, mu: &[f64]) -> Result<f64> {
        self.check_len(mu)?;
        Ok(if self.time_invariant {
            self.value_ti(mu)
        } else {
            self.value_tv(mu)
        })
    }

    /// Objective gradient at `mu`, written into `out`.
    pub fn gradient(&self, mu: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(mu)?;
        if out.len() != mu.len() {
            return Err(Error::Dimension("gradient buffer length".into()));
        }
        if self.time_invariant {
            self.gradient_ti(mu, out);
        } else {
            self.gradient_tv(mu, out);
        }
        Ok(())
    }

    /// `μ̄_n = Σ_h Σ_D P_c(h) P_d(D) μ̃_n(D, h)`.
    fn mean_service_ti(&self, mu: &[f64]) -> Vec<f64> {
        (0..self.users)
            .map(|n| {
                let mut acc = 0.0;
                for d in 0..self.subsets {
                    for h in 0..self.channels {
                        acc += self.pc(0, h) * self.demand[d] * mu[self.ti_index(n, d, h)];
                    }
                }
                acc
            })
            .collect()
    }

    fn value_ti(&self, mu: &[f64]) -> f64 {
        let mean = self.mean_service_ti(mu);
        let mut load = vec![0.0; self.users];
        let mut total = 0.0;
        for g in 0..self.channels {
            for b in 0..self.subsets {
                let w = self.pc(0, g) * self.demand[b];
                if w == 0.0 {
                    continue;
                }
                for (n, l) in load.iter_mut().enumerate() {
                    let carried = if contains(b, n) { self.service - mean[n] } else { 0.0 };
                    *l = (carried + mu[self.ti_index(n, b, g)]).max(0.0);
                }
                total += w * self.cost.value(&load, &self.gains[g]);
            }
        }
        total
    }

    fn gradient_ti(&self, mu: &[f64], out: &mut [f64]) {
        let mean = self.mean_service_ti(mu);
        let mut load = vec![0.0; self.users];
        let mut dc = vec![0.0; self.users];
        // direct[n,b,g] = w ∂C/∂L_n, requested[n] = Σ_{g, B∋n} direct
        let mut requested = vec![0.0; self.users];
        out.iter_mut().for_each(|o| *o = 0.0);
        for g in 0..self.channels {
            for b in 0..self.subsets {
                let w = self.pc(0, g) * self.demand[b];
                if w == 0.0 {
                    continue;
                }
                for (n, l) in load.iter_mut().enumerate() {
                    let carried = if contains(b, n) { self.service - mean[n] } else { 0.0 };
                    *l = (carried + mu[self.ti_index(n, b, g)]).max(0.0);
                }
                self.cost.gradient(&load, &self.gains[g], &mut dc);
                for n in 0..self.users {
                    out[self.ti_index(n, b, g)] = w * dc[n];
                    if contains(b, n) {
                        requested[n] += w * dc[n];
                    }
                }
            }
        }
        for (n, &req) in requested.iter().enumerate() {
            for b in 0..self.subsets {
                for g in 0..self.channels {
                    let i = self.ti_index(n, b, g);
                    out[i] -= self.pc(0, g) * self.demand[b] * req;
                }
            }
        }
    }

    /// `μ̄_n(s) = Σ_{s'} W[s'][s] Σ_h P_c(h|s') Σ_D P_d(D) μ̃_n(D, h, s', s)`,
    /// row-major `[n][s]`.
    fn mean_service_tv(&self, mu: &[f64]) -> Vec<f64> {
        let q = self.period;
        let mut mean = vec![0.0; self.users * q];
        for n in 0..self.users {
            for d in 0..self.subsets {
                for h in 0..self.channels {
                    for a in 0..q {
                        let p = self.demand[d] * self.pc(a, h);
                        if p == 0.0 {
                            continue;
                        }
                        for s in 0..q {
                            mean[n * q + s] += self.w(a, s) * p * mu[self.tv_index(n, d, h, a, s)];
                        }
                    }
                }
            }
        }
        mean
    }

    #[inline]
    fn fill_load_tv(&self, mu: &[f64], mean: &[f64], b: usize, g: usize, s: usize, load: &mut [f64]) {
        let q = self.period;
        for (n, l) in load.iter_mut().enumerate() {
            let carried = if contains(b, n) { self.service - mean[n * q + s] } else { 0.0 };
            let base = self.tv_index(n, b, g, s, 0);
            let ahead: f64 = (0..q).map(|t| self.w(s, t) * mu[base + t]).sum();
            *l = (carried + ahead).max(0.0);
        }
    }

    fn value_tv(&self, mu: &[f64]) -> f64 {
        let q = self.period;
        let ps = 1.0 / q as f64;
        let mean = self.mean_service_tv(mu);
        let mut load = vec![0.0; self.users];
        let mut total = 0.0;
        for s in 0..q {
            for g in 0..self.channels {
                for b in 0..self.subsets {
                    let w = ps * self.pc(s, g) * self.demand[b];
                    if w == 0.0 {
                        continue;
                    }
                    self.fill_load_tv(mu, &mean, b, g, s, &mut load);
                    total += w * self.cost.value(&load, &self.gains[g]);
                }
            }
        }
        total
    }

    fn gradient_tv(&self, mu: &[f64], out: &mut [f64]) {
        let q = self.period;
        let ps = 1.0 / q as f64;
        let mean = self.mean_service_tv(mu);
        let mut load = vec![0.0; self.users];
        let mut dc = vec![0.0; self.users];
        // direct[n,b,g,s] = w ∂C/∂L_n; requested[n,s] = Σ_{g, B∋n} direct
        let cells = self.subsets * self.channels * q;
        let mut direct = vec![0.0; self.users * cells];
        let mut requested = vec![0.0; self.users * q];
        for s in 0..q {
            for g in 0..self.channels {
                for b in 0..self.subsets {
                    let w = ps * self.pc(s, g) * self.demand[b];
                    if w == 0.0 {
                        continue;
                    }
                    self.fill_load_tv(mu, &mean, b, g, s, &mut load);
                    self.cost.gradient(&load, &self.gains[g], &mut dc);
                    for n in 0..self.users {
                        direct[n * cells + (b * self.channels + g) * q + s] = w * dc[n];
                        if contains(b, n) {
                            requested[n * q + s] += w * dc[n];
                        }
                    }
                }
            }
        }
        for n in 0..self.users {
            for b in 0..self.subsets {
                for g in 0..self.channels {
                    for a in 0..q {
                        let dir = direct[n * cells + (b * self.channels + g) * q + a];
                        let p = self.demand[b] * self.pc(a, g);
                        for t in 0..q {
                            out[self.tv_index(n, b, g, a, t)] =
                                self.w(a, t) * (dir - p * requested[n * q + t]);
                        }
                    }
                }
            }
        }
    }

    /// Expected per-slot cost at each slot index of the period, i.e. the
    /// stationary per-period level implied by `mu`.
    pub fn per_period_cost(&self, mu: &[f64]) -> Result<Vec<f64>> {
        self.check_len(mu)?;
        let mut load = vec![0.0; self.users];
        if self.time_invariant {
            return Ok(vec![self.value_ti(mu)]);
        }
        let mean = self.mean_service_tv(mu);
        let mut out = vec![0.0; self.period];
        for (s, o) in out.iter_mut().enumerate() {
            for g in 0..self.channels {
                for b in 0..self.subsets {
                    let w = self.pc(s, g) * self.demand[b];
                    if w == 0.0 {
                        continue;
                    }
                    self.fill_load_tv(mu, &mean, b, g, s, &mut load);
                    *o += w * self.cost.value(&load, &self.gains[g]);
                }
            }
        }
        Ok(out)
    }

    /// Expected per-user load at each slot index, averaged over users.
    pub fn per_period_load(&self, mu: &[f64]) -> Result<Vec<f64>> {
        self.check_len(mu)?;
        let mut load = vec![0.0; self.users];
        let q = self.period();
        let mut out = vec![0.0; q];
        let mean = if self.time_invariant {
            self.mean_service_ti(mu)
        } else {
            self.mean_service_tv(mu)
        };
        for (s, o) in out.iter_mut().enumerate() {
            for g in 0..self.channels {
                for b in 0..self.subsets {
                    let w = self.pc(s, g) * self.demand[b];
                    if w == 0.0 {
                        continue;
                    }
                    if self.time_invariant {
                        for (n, l) in load.iter_mut().enumerate() {
                            let carried = if contains(b, n) { self.service - mean[n] } else { 0.0 };
                            *l = carried + mu[self.ti_index(n, b, g)];
                        }
                    } else {
                        self.fill_load_tv(mu, &mean, b, g, s, &mut load);
                    }
                    *o += w * load.iter().sum::<f64>() / self.users as f64;
                }
            }
        }
        Ok(out)
    }
}

/// Time-invariant objective at a `μ̃(B, g)` table.
pub fn objective_ti(mu: &[f64], scenario: &Scenario) -> Result<f64> {
    Problem::new(scenario, BoundModel::TimeInvariant)?.value(mu)
}

/// Cyclo-stationary objective at a `μ̃(B, g, s, s')` table.
pub fn objective_tv(mu: &[f64], scenario: &Scenario) -> Result<f64> {
    Problem::new(scenario, BoundModel::TimeVarying)?.value(mu)
}

/// Cyclo-stationary objective for an arbitrary window length.
pub fn objective_tv_general(mu: &[f64], scenario: &Scenario, window: usize) -> Result<f64> {
    Problem::new(scenario, BoundModel::General { window })?.value(mu)
}
