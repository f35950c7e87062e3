//! Problem instances: users, demand statistics, channel statistics and the
//! per-slot cost function.
//!
//! Construction is permissive. [`Scenario::validate`] walks every contained
//! type and reports each invariant violation instead of failing on the first
//! one; operations that need a well-formed instance call
//! [`Scenario::ensure_valid`].

use std::fmt;
use std::sync::Arc;

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};

/// Tolerance used when checking that probability vectors sum to one.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// Channel gains observable by one user, worst first.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStateSpace {
    gains: Vec<f64>,
}

impl ChannelStateSpace {
    pub fn new(gains: Vec<f64>) -> Self {
        Self { gains }
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        if self.gains.is_empty() {
            out.push(Violation::new(path, ViolationKind::EmptyStateSpace));
            return;
        }
        for (k, &g) in self.gains.iter().enumerate() {
            if !(g.is_finite() && g > 0.0) {
                out.push(Violation::new(
                    format!("{path}[{k}]"),
                    ViolationKind::NonPositiveGain(g),
                ));
            }
        }
        if self.gains.windows(2).any(|w| !(w[1] > w[0])) {
            out.push(Violation::new(path, ViolationKind::GainsNotIncreasing));
        }
    }
}

/// Per-slot request statistics.
#[derive(Debug, Clone, PartialEq)]
pub enum DemandModel {
    /// Independent Bernoulli requests with the given per-user marginals.
    Independent { marginals: Vec<f64> },
    /// Explicit distribution over requesting sets, indexed by bitmask
    /// (bit `n` set when user `n` requests). Length `2^N`.
    Joint { probs: Vec<f64> },
}

impl DemandModel {
    pub fn independent(marginals: Vec<f64>) -> Self {
        DemandModel::Independent { marginals }
    }

    pub fn joint(probs: Vec<f64>) -> Self {
        DemandModel::Joint { probs }
    }

    fn check(&self, users: usize, out: &mut Vec<Violation>) {
        match self {
            DemandModel::Independent { marginals } => {
                if marginals.len() != users {
                    out.push(Violation::new(
                        "demand.marginals",
                        ViolationKind::UserCountMismatch {
                            expected: users,
                            found: marginals.len(),
                        },
                    ));
                }
                for (n, &p) in marginals.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        out.push(Violation::new(
                            format!("demand.marginals[{n}]"),
                            ViolationKind::ProbabilityOutOfRange(p),
                        ));
                    }
                }
            }
            DemandModel::Joint { probs } => {
                let expected = 1usize.checked_shl(users as u32).unwrap_or(0);
                if probs.len() != expected {
                    out.push(Violation::new(
                        "demand.joint",
                        ViolationKind::TableLength {
                            expected,
                            found: probs.len(),
                        },
                    ));
                }
                check_distribution("demand.joint", probs, out);
            }
        }
    }
}

/// Channel statistics for one slot index of the period.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotChannel {
    /// `probs[n][k]` is the probability that user `n` sees state `k`.
    Independent { probs: Vec<Vec<f64>> },
    /// Distribution over gain-index tuples in lexicographic order (user 0
    /// most significant).
    Joint { probs: Vec<f64> },
}

/// Cyclo-stationary channel statistics with period `slots.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    states: Vec<ChannelStateSpace>,
    slots: Vec<SlotChannel>,
}

impl ChannelModel {
    pub fn new(states: Vec<ChannelStateSpace>, slots: Vec<SlotChannel>) -> Self {
        Self { states, slots }
    }

    /// Time-invariant, independent-across-users channel.
    pub fn stationary(states: Vec<ChannelStateSpace>, probs: Vec<Vec<f64>>) -> Self {
        Self::new(states, vec![SlotChannel::Independent { probs }])
    }

    /// Every user shares the same state space and per-slot probabilities.
    pub fn symmetric(users: usize, gains: &[f64], per_slot: &[Vec<f64>]) -> Self {
        let states = vec![ChannelStateSpace::new(gains.to_vec()); users];
        let slots = per_slot
            .iter()
            .map(|p| SlotChannel::Independent {
                probs: vec![p.clone(); users],
            })
            .collect();
        Self::new(states, slots)
    }

    pub fn period(&self) -> usize {
        self.slots.len()
    }

    pub fn states(&self) -> &[ChannelStateSpace] {
        &self.states
    }

    pub fn slots(&self) -> &[SlotChannel] {
        &self.slots
    }

    pub fn users(&self) -> usize {
        self.states.len()
    }

    /// `Π_n K_n`, the number of joint channel realizations.
    pub fn joint_size(&self) -> usize {
        self.states.iter().map(|s| s.len()).product()
    }

    fn check(&self, out: &mut Vec<Violation>) {
        if self.slots.is_empty() {
            out.push(Violation::new("channel.period", ViolationKind::EmptyPeriod));
        }
        for (n, s) in self.states.iter().enumerate() {
            s.check(&format!("channel.states[{n}]"), out);
        }
        let users = self.states.len();
        for (s, slot) in self.slots.iter().enumerate() {
            match slot {
                SlotChannel::Independent { probs } => {
                    if probs.len() != users {
                        out.push(Violation::new(
                            format!("channel.probs[{s}]"),
                            ViolationKind::UserCountMismatch {
                                expected: users,
                                found: probs.len(),
                            },
                        ));
                    }
                    for (n, p) in probs.iter().enumerate() {
                        let path = format!("channel.probs[{s}][{n}]");
                        if let Some(states) = self.states.get(n) {
                            if p.len() != states.len() {
                                out.push(Violation::new(
                                    &path,
                                    ViolationKind::TableLength {
                                        expected: states.len(),
                                        found: p.len(),
                                    },
                                ));
                            }
                        }
                        check_distribution(&path, p, out);
                    }
                }
                SlotChannel::Joint { probs } => {
                    let path = format!("channel.joint[{s}]");
                    if probs.len() != self.joint_size() {
                        out.push(Violation::new(
                            &path,
                            ViolationKind::TableLength {
                                expected: self.joint_size(),
                                found: probs.len(),
                            },
                        ));
                    }
                    check_distribution(&path, probs, out);
                }
            }
        }
    }
}

fn check_distribution(path: &str, probs: &[f64], out: &mut Vec<Violation>) {
    let mut bad = false;
    for (i, &p) in probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            out.push(Violation::new(
                format!("{path}[{i}]"),
                ViolationKind::ProbabilityOutOfRange(p),
            ));
            bad = true;
        }
    }
    let sum: f64 = probs.iter().sum();
    if !bad && (sum - 1.0).abs() > PROB_SUM_TOL {
        out.push(Violation::new(path, ViolationKind::SumNotOne(sum)));
    }
}

/// User-supplied per-slot cost `C(L; g)`.
///
/// Implementations must be strictly convex and strictly increasing in each
/// load and nonincreasing in each gain; [`Scenario::validate`] probes this
/// numerically.
pub trait CostEvaluator: Send + Sync {
    fn eval(&self, load: &[f64], gain: &[f64]) -> f64;

    fn name(&self) -> &str {
        "custom"
    }
}

/// Per-slot cost of serving load vector `L` over channel vector `g`.
#[derive(Clone)]
pub enum CostFunction {
    /// `Σ_n L_n^p / g_n`.
    Polynomial { exponent: f64 },
    Custom(Arc<dyn CostEvaluator>),
}

impl fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostFunction::Polynomial { exponent } => f
                .debug_struct("Polynomial")
                .field("exponent", exponent)
                .finish(),
            CostFunction::Custom(c) => f.debug_tuple("Custom").field(&c.name()).finish(),
        }
    }
}

impl Default for CostFunction {
    fn default() -> Self {
        CostFunction::Polynomial { exponent: 4.0 }
    }
}

impl CostFunction {
    pub fn polynomial(exponent: f64) -> Self {
        CostFunction::Polynomial { exponent }
    }

    /// Checked evaluation.
    pub fn eval(&self, load: &[f64], gain: &[f64]) -> Result<f64> {
        if load.len() != gain.len() {
            return Err(Error::Dimension(format!(
                "load has {} entries, gain has {}",
                load.len(),
                gain.len()
            )));
        }
        if let Some((user, &gain)) = gain.iter().enumerate().find(|(_, g)| !(**g > 0.0)) {
            return Err(Error::NonPositiveGain { user, gain });
        }
        if let Some((user, &load)) = load.iter().enumerate().find(|(_, l)| !(**l >= 0.0)) {
            return Err(Error::NegativeLoad { user, load });
        }
        Ok(self.value(load, gain))
    }

    /// Unchecked evaluation for hot loops; inputs are assumed valid.
    #[inline]
    pub fn value(&self, load: &[f64], gain: &[f64]) -> f64 {
        match self {
            CostFunction::Polynomial { exponent } => load
                .iter()
                .zip(gain)
                .map(|(&l, &g)| power(l, *exponent) / g)
                .sum(),
            CostFunction::Custom(c) => c.eval(load, gain),
        }
    }

    /// Writes `∂C/∂L_n` into `out`. Analytic for the polynomial family,
    /// central differences otherwise.
    pub fn gradient(&self, load: &[f64], gain: &[f64], out: &mut [f64]) {
        match self {
            CostFunction::Polynomial { exponent } => {
                let p = *exponent;
                for ((o, &l), &g) in out.iter_mut().zip(load).zip(gain) {
                    *o = p * power(l, p - 1.0) / g;
                }
            }
            CostFunction::Custom(c) => {
                let mut probe = load.to_vec();
                for n in 0..load.len() {
                    let h = 1e-6 * load[n].abs().max(1.0);
                    // one-sided at the boundary of the domain
                    let lo = (load[n] - h).max(0.0);
                    let hi = load[n] + h;
                    probe[n] = hi;
                    let f_hi = c.eval(&probe, gain);
                    probe[n] = lo;
                    let f_lo = c.eval(&probe, gain);
                    probe[n] = load[n];
                    out[n] = (f_hi - f_lo) / (hi - lo);
                }
            }
        }
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self, CostFunction::Polynomial { .. })
    }

    fn check(&self, users: usize, probe_gains: &[f64], out: &mut Vec<Violation>) {
        match self {
            CostFunction::Polynomial { exponent } => {
                if !(exponent.is_finite() && *exponent > 1.0) {
                    out.push(Violation::new(
                        "cost.exponent",
                        ViolationKind::CostNotStrictlyConvex,
                    ));
                }
            }
            CostFunction::Custom(_) => {
                if users == 0 || probe_gains.len() != users {
                    return;
                }
                self.probe_shape(probe_gains, out);
            }
        }
    }

    /// Sampled convexity and monotonicity checks for custom evaluators.
    fn probe_shape(&self, gains: &[f64], out: &mut Vec<Violation>) {
        let users = gains.len();
        let mut rng = SplitMix64::seed_from_u64(0x5eed_c057);
        let mut uniform = move || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let zero = vec![0.0; users];
        if self.value(&zero, gains).is_nan() {
            out.push(Violation::new("cost", ViolationKind::CostNotFinite));
            return;
        }
        for _ in 0..64 {
            let a: Vec<f64> = (0..users).map(|_| 2.0 * uniform()).collect();
            let b: Vec<f64> = (0..users).map(|_| 2.0 * uniform()).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let (fa, fb, fm) = (
                self.value(&a, gains),
                self.value(&b, gains),
                self.value(&mid, gains),
            );
            if ![fa, fb, fm].iter().all(|v| v.is_finite() && *v >= 0.0) {
                out.push(Violation::new("cost", ViolationKind::CostNotFinite));
                return;
            }
            if fm >= 0.5 * (fa + fb) {
                out.push(Violation::new("cost", ViolationKind::CostNotStrictlyConvex));
                return;
            }
            let n = (uniform() * users as f64) as usize % users;
            let mut up = a.clone();
            up[n] += 0.1;
            if self.value(&up, gains) <= fa {
                out.push(Violation::new("cost", ViolationKind::CostNotIncreasing));
                return;
            }
            let mut better = gains.to_vec();
            better[n] *= 1.5;
            if self.value(&a, &better) > fa {
                out.push(Violation::new("cost", ViolationKind::CostIncreasingInGain));
                return;
            }
        }
    }
}

#[inline]
fn power(x: f64, p: f64) -> f64 {
    if p == p.trunc() && p.abs() < 64.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

/// A full problem instance.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub service_size: f64,
    pub demand: DemandModel,
    pub channel: ChannelModel,
    pub cost: CostFunction,
}

impl Scenario {
    pub fn new(
        service_size: f64,
        demand: DemandModel,
        channel: ChannelModel,
        cost: CostFunction,
    ) -> Self {
        Self {
            service_size,
            demand,
            channel,
            cost,
        }
    }

    /// User count, taken from the channel state spaces.
    pub fn users(&self) -> usize {
        self.channel.users()
    }

    pub fn period(&self) -> usize {
        self.channel.period()
    }

    /// Every invariant violation in the instance; empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let users = self.users();
        if users == 0 {
            out.push(Violation::new("users", ViolationKind::NoUsers));
        }
        if !(self.service_size.is_finite() && self.service_size > 0.0) {
            out.push(Violation::new(
                "service_size",
                ViolationKind::NonPositiveServiceSize(self.service_size),
            ));
        }
        self.demand.check(users, &mut out);
        self.channel.check(&mut out);
        let probe: Vec<f64> = self
            .channel
            .states()
            .iter()
            .filter_map(|s| s.gains().first().copied())
            .collect();
        self.cost.check(users, &probe, &mut out);
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(v))
        }
    }
}

/// Free-function form of [`Scenario::validate`].
pub fn validate_scenario(scenario: &Scenario) -> Vec<Violation> {
    scenario.validate()
}

/// Free-function form of [`CostFunction::eval`].
pub fn eval_cost(cost: &CostFunction, load: &[f64], gain: &[f64]) -> Result<f64> {
    cost.eval(load, gain)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
}

impl Violation {
    pub fn new(path: impl Into<String>, kind: ViolationKind) -> Self {
        Self {
            path: path.into(),
            kind,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    NoUsers,
    NonPositiveServiceSize(f64),
    ProbabilityOutOfRange(f64),
    SumNotOne(f64),
    UserCountMismatch { expected: usize, found: usize },
    TableLength { expected: usize, found: usize },
    EmptyStateSpace,
    NonPositiveGain(f64),
    GainsNotIncreasing,
    EmptyPeriod,
    CostNotStrictlyConvex,
    CostNotIncreasing,
    CostIncreasingInGain,
    CostNotFinite,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::NoUsers => write!(f, "no users"),
            ViolationKind::NonPositiveServiceSize(s) => {
                write!(f, "service size must be positive (got {s})")
            }
            ViolationKind::ProbabilityOutOfRange(p) => {
                write!(f, "probability out of range (got {p})")
            }
            ViolationKind::SumNotOne(s) => {
                write!(f, "probabilities do not sum to 1 (sum {s})")
            }
            ViolationKind::UserCountMismatch { expected, found } => {
                write!(f, "expected {expected} users, found {found}")
            }
            ViolationKind::TableLength { expected, found } => {
                write!(f, "expected {expected} entries, found {found}")
            }
            ViolationKind::EmptyStateSpace => write!(f, "state space is empty"),
            ViolationKind::NonPositiveGain(g) => write!(f, "gain must be positive (got {g})"),
            ViolationKind::GainsNotIncreasing => write!(f, "gains must be strictly increasing"),
            ViolationKind::EmptyPeriod => write!(f, "period must be at least 1"),
            ViolationKind::CostNotStrictlyConvex => write!(f, "cost is not strictly convex"),
            ViolationKind::CostNotIncreasing => write!(f, "cost is not increasing in load"),
            ViolationKind::CostIncreasingInGain => write!(f, "cost increases with gain"),
            ViolationKind::CostNotFinite => write!(f, "cost is not finite and nonnegative"),
        }
    }
}
