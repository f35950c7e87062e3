//! Stationary proactive policies and the per-slot control law.
//!
//! A compiled [`PolicyTable`] maps the current realization (requesting set,
//! channel vector, slot index) to proactive controls for the next `T` slots.
//! The [`ServiceLedger`] holds, per user, the credit already pre-served
//! toward each slot of the window.

use crate::error::{Error, Result};
use crate::solver::{LowerBoundSolution, MuTable};
use crate::stats::contains;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Reactive,
    ProactiveTi,
    ProactiveTv,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Reactive => "reactive",
            PolicyKind::ProactiveTi => "proactive_ti",
            PolicyKind::ProactiveTv => "proactive_tv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "reactive" => Some(PolicyKind::Reactive),
            "proactive_ti" | "proactive-ti" => Some(PolicyKind::ProactiveTi),
            "proactive_tv" | "proactive-tv" => Some(PolicyKind::ProactiveTv),
            _ => None,
        }
    }
}

/// Compiled lookup table. For `ProactiveTi` the table is `μ̃_n(B, g)`; for
/// `ProactiveTv` it is `μ̃_n(B, g, s, s')`. Reactive tables are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub kind: PolicyKind,
    pub window: usize,
    pub period: usize,
    pub users: usize,
    pub subsets: usize,
    pub channels: usize,
    pub service_size: f64,
    pub mu: Vec<f64>,
}

impl PolicyTable {
    pub fn reactive(users: usize, service_size: f64) -> Self {
        Self {
            kind: PolicyKind::Reactive,
            window: 0,
            period: 1,
            users,
            subsets: 1 << users,
            channels: 0,
            service_size,
            mu: Vec::new(),
        }
    }

    /// Number of lookup-table rows, `2^N Π_n K_n` (times `Q²` for
    /// cyclo-stationary tables).
    pub fn lookup_len(&self) -> usize {
        match self.kind {
            PolicyKind::Reactive => 0,
            PolicyKind::ProactiveTi => self.subsets * self.channels,
            PolicyKind::ProactiveTv => self.subsets * self.channels * self.period * self.period,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.kind != PolicyKind::Reactive {
            if self.window == 0 {
                return Err(Error::InvalidArgument("window must be at least 1".into()));
            }
            if self.mu.len() != self.users * self.lookup_len() {
                return Err(Error::Dimension(format!(
                    "policy table has {} entries, expected {}",
                    self.mu.len(),
                    self.users * self.lookup_len()
                )));
            }
            if let Some(v) = self
                .mu
                .iter()
                .find(|v| !(**v >= 0.0 && **v <= self.service_size))
            {
                return Err(Error::InvalidArgument(format!(
                    "table entry {v} outside [0, {}]",
                    self.service_size
                )));
            }
        }
        Ok(())
    }

    /// `u_n(τ)` for `τ = 1..=T`, written into `out[τ - 1]`.
    pub fn controls(&self, user: usize, mask: usize, channel: usize, s: usize, out: &mut [f64]) {
        let inv = 1.0 / self.window as f64;
        match self.kind {
            PolicyKind::Reactive => out.iter_mut().for_each(|u| *u = 0.0),
            PolicyKind::ProactiveTi => {
                let i = (user * self.subsets + mask) * self.channels + channel;
                let u = self.mu[i] * inv;
                out.iter_mut().for_each(|o| *o = u);
            }
            PolicyKind::ProactiveTv => {
                let q = self.period;
                let base = (((user * self.subsets + mask) * self.channels + channel) * q + s) * q;
                let row = &self.mu[base..base + q];
                let mut target = (s + 1) % q;
                for o in out.iter_mut() {
                    *o = row[target] * inv;
                    target += 1;
                    if target == q {
                        target = 0;
                    }
                }
            }
        }
    }
}

/// `f_τ(s) = (s + τ) mod Q`.
pub fn target_index(s: usize, tau: usize, period: usize) -> usize {
    (s + tau) % period
}

fn check_solution_shape(solution: &LowerBoundSolution, users: usize) -> Result<()> {
    if solution.mu.users() != users {
        return Err(Error::Dimension(format!(
            "solution has {} users, scenario has {users}",
            solution.mu.users()
        )));
    }
    Ok(())
}

/// Policy that spreads `μ̃(B_t, g_t)` evenly over the next `window` slots.
pub fn compile_ti(solution: &LowerBoundSolution, window: usize, users: usize) -> Result<PolicyTable> {
    check_solution_shape(solution, users)?;
    let MuTable::Ti(t) = &solution.mu else {
        return Err(Error::InvalidArgument(
            "time-invariant policy needs a time-invariant solution".into(),
        ));
    };
    let table = PolicyTable {
        kind: PolicyKind::ProactiveTi,
        window,
        period: 1,
        users: t.users,
        subsets: t.subsets,
        channels: t.channels,
        service_size: solution.service_size,
        mu: t.values.clone(),
    };
    table.check()?;
    Ok(table)
}

/// Policy that assigns `μ̃(B_t, g_t, s_t, f_τ(s_t)) / T` toward slot `t + τ`.
pub fn compile_tv(
    solution: &LowerBoundSolution,
    window: usize,
    period: usize,
    users: usize,
) -> Result<PolicyTable> {
    check_solution_shape(solution, users)?;
    let table = match &solution.mu {
        MuTable::Tv(t) => {
            if t.period != period {
                return Err(Error::Dimension(format!(
                    "solution period {} differs from {period}",
                    t.period
                )));
            }
            PolicyTable {
                kind: PolicyKind::ProactiveTv,
                window,
                period,
                users: t.users,
                subsets: t.subsets,
                channels: t.channels,
                service_size: solution.service_size,
                mu: t.values.clone(),
            }
        }
        MuTable::Ti(t) if period == 1 => PolicyTable {
            kind: PolicyKind::ProactiveTv,
            window,
            period: 1,
            users: t.users,
            subsets: t.subsets,
            channels: t.channels,
            service_size: solution.service_size,
            mu: t.values.clone(),
        },
        MuTable::Ti(_) => {
            return Err(Error::InvalidArgument(
                "cyclo-stationary policy needs a cyclo-stationary solution".into(),
            ))
        }
    };
    table.check()?;
    Ok(table)
}

/// `L_n = S d_n`.
pub fn step_reactive(requests: &[bool], service_size: f64) -> Vec<f64> {
    requests
        .iter()
        .map(|&d| if d { service_size } else { 0.0 })
        .collect()
}

/// Per-user ring buffers of pre-served credit. Offset 0 is the current slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceLedger {
    users: usize,
    window: usize,
    service_size: f64,
    head: usize,
    credit: Vec<f64>,
    clip_events: u64,
}

impl ServiceLedger {
    pub fn new(users: usize, window: usize, service_size: f64) -> Self {
        let window = window.max(1);
        Self {
            users,
            window,
            service_size,
            head: 0,
            credit: vec![0.0; users * window],
            clip_events: 0,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    #[inline]
    fn slot(&self, user: usize, offset: usize) -> usize {
        user * self.window + (self.head + offset) % self.window
    }

    /// Credit held for `user` toward the slot `offset` slots ahead.
    pub fn credit(&self, user: usize, offset: usize) -> f64 {
        self.credit[self.slot(user, offset)]
    }

    /// Credit maturing in the current slot.
    pub fn matured(&self, user: usize) -> f64 {
        self.credit(user, 0)
    }

    /// Adds `amount` toward the slot `offset` ahead, capped at `S`. Returns
    /// the amount actually credited.
    pub fn add(&mut self, user: usize, offset: usize, amount: f64) -> f64 {
        let i = self.slot(user, offset);
        let room = self.service_size - self.credit[i];
        let applied = if amount > room {
            self.clip_events += 1;
            room.max(0.0)
        } else {
            amount.max(0.0)
        };
        self.credit[i] += applied;
        applied
    }

    /// Number of credits cut back to keep a slot at or below `S`.
    pub fn clip_events(&self) -> u64 {
        self.clip_events
    }

    /// Moves to the next slot. The consumed slot is recycled as the farthest
    /// future slot with zero credit.
    pub fn advance(&mut self) {
        for n in 0..self.users {
            let i = self.slot(n, 0);
            self.credit[i] = 0.0;
        }
        self.head = (self.head + 1) % self.window;
    }

    /// Every credit lies in `[0, S]`.
    pub fn is_feasible(&self) -> bool {
        self.credit
            .iter()
            .all(|&c| (0.0..=self.service_size).contains(&c))
    }
}

/// Free-function form of [`ServiceLedger::advance`].
pub fn ledger_advance(ledger: &mut ServiceLedger) {
    ledger.advance();
}

/// Result of one slot under a proactive policy.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub load: Vec<f64>,
    /// Credit that matured in this slot, per user.
    pub matured: Vec<f64>,
    /// Reactive remainder `S − matured` served for requesting users, else 0.
    pub remainder: Vec<f64>,
}

/// Scratch space for [`step_proactive_into`].
#[derive(Debug, Clone)]
pub struct StepBuffers {
    controls: Vec<f64>,
}

impl StepBuffers {
    pub fn new(window: usize) -> Self {
        Self {
            controls: vec![0.0; window.max(1)],
        }
    }
}

/// One slot of the proactive load equation
/// `L_n = (S − matured_n) d_n + Σ_τ u_n(τ)`, updating the ledger in place.
pub fn step_proactive(
    table: &PolicyTable,
    mask: usize,
    channel: usize,
    s: usize,
    ledger: &mut ServiceLedger,
) -> StepOutcome {
    let mut out = StepOutcome {
        load: vec![0.0; table.users],
        matured: vec![0.0; table.users],
        remainder: vec![0.0; table.users],
    };
    let mut buf = StepBuffers::new(table.window);
    step_proactive_into(table, mask, channel, s, ledger, &mut buf, &mut out);
    out
}

pub fn step_proactive_into(
    table: &PolicyTable,
    mask: usize,
    channel: usize,
    s: usize,
    ledger: &mut ServiceLedger,
    buf: &mut StepBuffers,
    out: &mut StepOutcome,
) {
    let service = table.service_size;
    for n in 0..table.users {
        let matured = ledger.matured(n);
        out.matured[n] = matured;
        out.remainder[n] = if contains(mask, n) {
            (service - matured).max(0.0)
        } else {
            0.0
        };
    }
    ledger.advance();
    for n in 0..table.users {
        let mut ahead = 0.0;
        if table.kind != PolicyKind::Reactive {
            let controls = &mut buf.controls[..table.window];
            table.controls(n, mask, channel, s, controls);
            // after advance, slot t + τ sits at offset τ - 1
            for (k, &u) in controls.iter().enumerate() {
                if u > 0.0 {
                    ahead += ledger.add(n, k, u);
                }
            }
        }
        out.load[n] = out.remainder[n] + ahead;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{BoundModel, MuTableTi, MuTableTv, SolverDiagnostics};
    use approx::assert_abs_diff_eq;

    fn diag() -> SolverDiagnostics {
        SolverDiagnostics {
            iterations: 0,
            projected_gradient_norm: 0.0,
            converged: true,
            stalled: false,
        }
    }

    fn ti_solution(values: Vec<f64>, users: usize, subsets: usize, channels: usize) -> LowerBoundSolution {
        LowerBoundSolution {
            model: BoundModel::TimeInvariant,
            service_size: 1.0,
            mu: MuTable::Ti(MuTableTi {
                users,
                subsets,
                channels,
                values,
            }),
            bound: 0.0,
            diagnostics: diag(),
        }
    }

    #[test]
    fn zero_table_is_reactive() {
        let sol = ti_solution(vec![0.0; 4], 1, 2, 2);
        let table = compile_ti(&sol, 5, 1).unwrap();
        let mut ledger = ServiceLedger::new(1, 5, 1.0);
        let out = step_proactive(&table, 1, 0, 0, &mut ledger);
        assert_eq!(out.load, vec![1.0]);
        assert!((0..5).all(|k| ledger.credit(0, k) == 0.0));
    }

    #[test]
    fn full_table_spreads_evenly() {
        let sol = ti_solution(vec![1.0; 4], 1, 2, 2);
        let table = compile_ti(&sol, 10, 1).unwrap();
        let mut u = vec![0.0; 10];
        table.controls(0, 1, 1, 0, &mut u);
        assert!(u.iter().all(|&x| (x - 0.1).abs() < 1e-15));
        let mut ledger = ServiceLedger::new(1, 10, 1.0);
        step_proactive(&table, 0, 0, 0, &mut ledger);
        for k in 0..10 {
            assert_abs_diff_eq!(ledger.credit(0, k), 0.1, epsilon = 1e-15);
        }
    }

    #[test]
    fn lookup_lengths() {
        let sol = ti_solution(vec![0.0; 2 * 16], 2, 4, 4);
        assert_eq!(compile_ti(&sol, 50, 2).unwrap().lookup_len(), 16);
        let tv = LowerBoundSolution {
            model: BoundModel::TimeVarying,
            service_size: 1.0,
            mu: MuTable::Tv(MuTableTv::zeros(2, 4, 4, 14)),
            bound: 0.0,
            diagnostics: diag(),
        };
        assert_eq!(compile_tv(&tv, 14, 14, 2).unwrap().lookup_len(), 3136);
        assert!(compile_tv(&tv, 14, 7, 2).is_err());
        assert!(compile_ti(&tv, 14, 2).is_err());
        assert!(compile_ti(&sol, 14, 3).is_err());
        assert!(compile_ti(&sol, 0, 2).is_err());
    }

    #[test]
    fn modular_wraparound() {
        assert_eq!(target_index(13, 1, 14), 0);
        let mut tv = MuTableTv::zeros(1, 2, 1, 14);
        let i = tv.index(0, 1, 0, 13, 0);
        tv.values[i] = 0.7;
        let sol = LowerBoundSolution {
            model: BoundModel::TimeVarying,
            service_size: 1.0,
            mu: MuTable::Tv(tv),
            bound: 0.0,
            diagnostics: diag(),
        };
        let table = compile_tv(&sol, 14, 14, 1).unwrap();
        let mut u = vec![0.0; 14];
        table.controls(0, 1, 0, 13, &mut u);
        assert_abs_diff_eq!(u[0], 0.05, epsilon = 1e-15);
        assert!(u[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_period_tv_matches_ti() {
        let values = vec![0.2, 0.4, 0.6, 0.8];
        let ti = compile_ti(&ti_solution(values.clone(), 1, 2, 2), 4, 1).unwrap();
        let tv = compile_tv(&ti_solution(values, 1, 2, 2), 4, 1, 1).unwrap();
        let (mut a, mut b) = (ServiceLedger::new(1, 4, 1.0), ServiceLedger::new(1, 4, 1.0));
        for t in 0..20 {
            let (mask, ch) = (t % 2, (t / 2) % 2);
            let x = step_proactive(&ti, mask, ch, 0, &mut a);
            let y = step_proactive(&tv, mask, ch, 0, &mut b);
            assert_eq!(x, y);
        }
    }

    #[test]
    fn reactive_step() {
        assert_eq!(step_reactive(&[true, false], 1.0), vec![1.0, 0.0]);
        assert_eq!(step_reactive(&[false, false], 1.0), vec![0.0, 0.0]);
        assert_eq!(step_reactive(&[true, true], 2.0), vec![2.0, 2.0]);
    }

    #[test]
    fn steady_state_delivers_exactly_s() {
        let m = 0.6;
        let table = compile_ti(&ti_solution(vec![m; 4], 1, 2, 2), 8, 1).unwrap();
        let mut ledger = ServiceLedger::new(1, 8, 1.0);
        let mut last = None;
        for _ in 0..9 {
            last = Some(step_proactive(&table, 1, 1, 0, &mut ledger));
        }
        let out = last.unwrap();
        assert_abs_diff_eq!(out.matured[0], m, epsilon = 1e-12);
        assert_abs_diff_eq!(out.load[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.matured[0] + out.remainder[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn no_request_is_pure_preservice() {
        let m = 0.6;
        let table = compile_ti(&ti_solution(vec![m; 4], 1, 2, 2), 8, 1).unwrap();
        let mut ledger = ServiceLedger::new(1, 8, 1.0);
        for _ in 0..8 {
            step_proactive(&table, 0, 0, 0, &mut ledger);
        }
        let out = step_proactive(&table, 0, 0, 0, &mut ledger);
        assert_abs_diff_eq!(out.load[0], m, epsilon = 1e-12);
        assert_eq!(out.remainder[0], 0.0);
    }

    #[test]
    fn advance_shifts_and_recycles() {
        let mut l = ServiceLedger::new(1, 4, 1.0);
        ledger_advance(&mut l);
        assert!((0..4).all(|k| l.credit(0, k) == 0.0));

        l.add(0, 1, 0.3);
        ledger_advance(&mut l);
        assert_eq!(l.matured(0), 0.3);

        let mut l = ServiceLedger::new(1, 4, 1.0);
        for k in 0..4 {
            l.add(0, k, 0.25);
        }
        // each advance consumes the current slot and opens an empty one
        for step in 1..=4 {
            ledger_advance(&mut l);
            for k in 0..4 {
                let want = if k < 4 - step { 0.25 } else { 0.0 };
                assert_eq!(l.credit(0, k), want);
            }
        }
    }

    #[test]
    fn clipping_caps_credit() {
        let mut l = ServiceLedger::new(1, 2, 1.0);
        assert_eq!(l.add(0, 0, 0.7), 0.7);
        assert_abs_diff_eq!(l.add(0, 0, 0.7), 0.3, epsilon = 1e-15);
        assert_eq!(l.clip_events(), 1);
        assert!(l.is_feasible());
    }
}
