//! Seeded Monte Carlo evaluation of reactive and proactive policies.
//!
//! # Random streams
//!
//! Replication `r` of a run with master seed `m` draws from xoshiro256**
//! seeded through `SplitMix64` with
//!
//! ```text
//! seed(m, r) = splitmix64_next(m XOR (r * 0x9E3779B97F4A7C15))
//! ```
//!
//! where `splitmix64_next(x)` is the first output of a SplitMix64 generator
//! whose state is `x`. Uniform variates are `(next_u64 >> 11) * 2^-53`.
//! Each slot draws one uniform for the requesting set and then one for the
//! channel vector, each by inverse CDF over the table in its documented
//! enumeration order. Slot `t` (starting at 0) has slot index `t mod Q`.

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256StarStar};

use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::policy::{PolicyKind, PolicyTable, ServiceLedger, StepBuffers, StepOutcome};
use crate::stats::{contains, ChannelTable, DemandTable, Tables};

/// Tolerance used by the on-time delivery audit.
const AUDIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: usize,
    pub replications: usize,
    pub seed: u64,
    /// Slots excluded from averages; `None` means the policy window.
    pub burn_in: Option<usize>,
    pub record_per_period: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 10_000,
            replications: 40,
            seed: 1,
            burn_in: None,
            record_per_period: false,
        }
    }
}

impl SimConfig {
    pub fn effective_burn_in(&self, policy: &PolicyTable) -> usize {
        self.burn_in.unwrap_or(policy.window)
    }

    fn check(&self, policy: &PolicyTable) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be at least 1".into()));
        }
        if self.effective_burn_in(policy) >= self.horizon {
            return Err(Error::InvalidArgument(format!(
                "burn-in {} must be shorter than the horizon {}",
                self.effective_burn_in(policy),
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Stream seed for replication `r`.
pub fn replication_seed(master: u64, replication: u64) -> u64 {
    SplitMix64::seed_from_u64(master ^ replication.wrapping_mul(0x9E37_79B9_7F4A_7C15)).next_u64()
}

/// Per-replication random stream.
pub struct SlotRng(Xoshiro256StarStar);

impl SlotRng {
    pub fn new(master: u64, replication: u64) -> Self {
        Self(Xoshiro256StarStar::seed_from_u64(replication_seed(master, replication)))
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the accumulated mass
    last
}

/// One realization: requesting-set bitmask and flat channel index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotDraw {
    pub mask: usize,
    pub channel: usize,
}

impl SlotDraw {
    pub fn requests(&self, users: usize) -> Vec<bool> {
        (0..users).map(|n| contains(self.mask, n)).collect()
    }
}

pub fn sample_slot(demand: &DemandTable, channel: &ChannelTable, s: usize, rng: &mut SlotRng) -> SlotDraw {
    let mask = inverse_cdf(demand.probs(), rng.uniform());
    let channel = inverse_cdf(channel.slot(s), rng.uniform());
    SlotDraw { mask, channel }
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Mean and standard error over replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn from_samples(samples: &[f64]) -> Self {
        let r = samples.len() as f64;
        let mut acc = CompensatedSum::default();
        samples.iter().for_each(|&x| acc.add(x));
        let mean = acc.value() / r;
        let stderr = if samples.len() > 1 {
            let mut ss = CompensatedSum::default();
            samples.iter().for_each(|&x| ss.add((x - mean).powi(2)));
            (ss.value() / (r - 1.0) / r).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }
}

/// Average cost and per-user load at each slot index of the period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodProfile {
    pub cost: Vec<Estimate>,
    /// Load averaged over users.
    pub load: Vec<Estimate>,
}

/// Counters from the on-time delivery audit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LedgerAudit {
    pub slots: u64,
    /// Slots where a request did not receive exactly `S`, or a credit left
    /// `[0, S]`, or a load went negative.
    pub violations: u64,
    pub clip_events: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub policy: PolicyKind,
    pub window: usize,
    pub horizon: usize,
    pub replications: usize,
    pub burn_in: usize,
    pub cost: Estimate,
    pub load: Vec<Estimate>,
    pub per_period: Option<PeriodProfile>,
    pub audit: LedgerAudit,
}

impl SimResult {
    pub fn per_period_profile(&self) -> Result<&PeriodProfile> {
        self.per_period.as_ref().ok_or(Error::RecordingDisabled)
    }
}

/// Free-function form of [`SimResult::per_period_profile`].
pub fn per_period_profile(result: &SimResult) -> Result<&PeriodProfile> {
    result.per_period_profile()
}

/// Slot-level observer; receives every slot including burn-in.
pub trait SlotObserver {
    fn observe(&mut self, replication: usize, t: usize, draw: SlotDraw, outcome: &StepOutcome, cost: f64);
}

impl SlotObserver for () {
    fn observe(&mut self, _: usize, _: usize, _: SlotDraw, _: &StepOutcome, _: f64) {}
}

struct ReplicationStats {
    cost: f64,
    load: Vec<f64>,
    period_cost: Vec<f64>,
    period_load: Vec<f64>,
}

/// Runs every replication in ascending order and aggregates them.
pub fn run(scenario: &Scenario, policy: &PolicyTable, config: &SimConfig) -> Result<SimResult> {
    run_observed(scenario, policy, config, &mut ())
}

pub fn run_observed<O: SlotObserver>(
    scenario: &Scenario,
    policy: &PolicyTable,
    config: &SimConfig,
    observer: &mut O,
) -> Result<SimResult> {
    let tables = Tables::build(scenario)?;
    config.check(policy)?;
    policy.check()?;
    let users = scenario.users();
    if policy.users != users || (policy.kind != PolicyKind::Reactive && policy.subsets != tables.demand.len()) {
        return Err(Error::Dimension("policy does not match the scenario users".into()));
    }
    if policy.kind != PolicyKind::Reactive && policy.channels != tables.channel.len() {
        return Err(Error::Dimension("policy does not match the scenario channels".into()));
    }
    if policy.kind == PolicyKind::ProactiveTv && policy.period != scenario.period() {
        return Err(Error::Dimension(format!(
            "policy period {} differs from the channel period {}",
            policy.period,
            scenario.period()
        )));
    }
    let burn_in = config.effective_burn_in(policy);
    let gains = tables.channel.gain_vectors();
    let q = tables.channel.period();

    let mut audit = LedgerAudit::default();
    let mut reps = Vec::with_capacity(config.replications);
    for r in 0..config.replications {
        reps.push(run_replication(
            scenario, policy, config, &tables, &gains, q, burn_in, r, &mut audit, observer,
        ));
    }

    let cost_samples: Vec<f64> = reps.iter().map(|r| r.cost).collect();
    let load = (0..users)
        .map(|n| Estimate::from_samples(&reps.iter().map(|r| r.load[n]).collect::<Vec<_>>()))
        .collect();
    let per_period = config.record_per_period.then(|| PeriodProfile {
        cost: (0..q)
            .map(|s| Estimate::from_samples(&reps.iter().map(|r| r.period_cost[s]).collect::<Vec<_>>()))
            .collect(),
        load: (0..q)
            .map(|s| Estimate::from_samples(&reps.iter().map(|r| r.period_load[s]).collect::<Vec<_>>()))
            .collect(),
    });
    Ok(SimResult {
        policy: policy.kind,
        window: policy.window,
        horizon: config.horizon,
        replications: config.replications,
        burn_in,
        cost: Estimate::from_samples(&cost_samples),
        load,
        per_period,
        audit,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_replication<O: SlotObserver>(
    scenario: &Scenario,
    policy: &PolicyTable,
    config: &SimConfig,
    tables: &Tables,
    gains: &[Vec<f64>],
    q: usize,
    burn_in: usize,
    replication: usize,
    audit: &mut LedgerAudit,
    observer: &mut O,
) -> ReplicationStats {
    let users = scenario.users();
    let service = scenario.service_size;
    let mut rng = SlotRng::new(config.seed, replication as u64);
    let mut ledger = ServiceLedger::new(users, policy.window, service);
    let mut buf = StepBuffers::new(policy.window);
    let mut outcome = StepOutcome {
        load: vec![0.0; users],
        matured: vec![0.0; users],
        remainder: vec![0.0; users],
    };

    let mut cost = CompensatedSum::default();
    let mut load = vec![CompensatedSum::default(); users];
    let mut period_cost = vec![CompensatedSum::default(); q];
    let mut period_load = vec![CompensatedSum::default(); q];
    let mut period_count = vec![0usize; q];

    for t in 0..config.horizon {
        let s = t % q;
        let draw = sample_slot(&tables.demand, &tables.channel, s, &mut rng);
        crate::policy::step_proactive_into(policy, draw.mask, draw.channel, s, &mut ledger, &mut buf, &mut outcome);
        let c = scenario.cost.value(&outcome.load, &gains[draw.channel]);

        audit.slots += 1;
        let delivered_ok = (0..users).all(|n| {
            let m = outcome.matured[n];
            let credit_ok = (-AUDIT_TOL..=service + AUDIT_TOL).contains(&m);
            let on_time = !contains(draw.mask, n) || (m + outcome.remainder[n] - service).abs() <= AUDIT_TOL;
            credit_ok && on_time && outcome.load[n] >= 0.0
        });
        if !delivered_ok {
            audit.violations += 1;
        }
        observer.observe(replication, t, draw, &outcome, c);

        if t >= burn_in {
            cost.add(c);
            for (acc, &l) in load.iter_mut().zip(&outcome.load) {
                acc.add(l);
            }
            if config.record_per_period {
                period_cost[s].add(c);
                period_load[s].add(outcome.load.iter().sum::<f64>() / users as f64);
                period_count[s] += 1;
            }
        }
    }
    audit.clip_events += ledger.clip_events();

    let kept = (config.horizon - burn_in) as f64;
    ReplicationStats {
        cost: cost.value() / kept,
        load: load.iter().map(|a| a.value() / kept).collect(),
        period_cost: period_cost
            .iter()
            .zip(&period_count)
            .map(|(a, &c)| if c > 0 { a.value() / c as f64 } else { 0.0 })
            .collect(),
        period_load: period_load
            .iter()
            .zip(&period_count)
            .map(|(a, &c)| if c > 0 { a.value() / c as f64 } else { 0.0 })
            .collect(),
    }
}

/// Expected reactive cost per slot, by enumeration over the tables.
pub fn reactive_cost(scenario: &Scenario) -> Result<f64> {
    Ok(reactive_cost_per_period(scenario)?.iter().sum::<f64>() / scenario.period() as f64)
}

/// Expected reactive cost at each slot index of the period.
pub fn reactive_cost_per_period(scenario: &Scenario) -> Result<Vec<f64>> {
    let tables = Tables::build(scenario)?;
    let users = scenario.users();
    let gains = tables.channel.gain_vectors();
    let mut load = vec![0.0; users];
    Ok((0..tables.channel.period())
        .map(|s| {
            let mut acc = 0.0;
            for (g, &pc) in tables.channel.slot(s).iter().enumerate() {
                for (b, pd) in tables.demand.entries() {
                    for (n, l) in load.iter_mut().enumerate() {
                        *l = if contains(b, n) { scenario.service_size } else { 0.0 };
                    }
                    acc += pc * pd * scenario.cost.value(&load, &gains[g]);
                }
            }
            acc
        })
        .collect())
}
