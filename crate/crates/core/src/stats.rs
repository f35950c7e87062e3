//! Explicit joint distributions over requesting sets and channel vectors.
//!
//! Requesting sets are bitmasks (bit `n` set when user `n` requests) listed
//! in ascending order. Channel vectors are index tuples `(k_0, .., k_{N-1})`
//! flattened lexicographically with user 0 most significant.

use crate::error::{Error, Result};
use crate::model::{ChannelModel, DemandModel, Scenario, SlotChannel};

/// `P_d(B)` for every `B ⊆ {0..N-1}`, indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandTable {
    users: usize,
    probs: Vec<f64>,
}

impl DemandTable {
    pub fn users(&self) -> usize {
        self.users
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, mask: usize) -> f64 {
        self.probs[mask]
    }

    /// `(mask, P_d(mask))` in ascending mask order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().copied().enumerate()
    }

    /// Per-user request probability recovered by marginalization.
    pub fn marginals(&self) -> Vec<f64> {
        (0..self.users)
            .map(|n| {
                self.entries()
                    .filter(|(m, _)| m & (1 << n) != 0)
                    .map(|(_, p)| p)
                    .sum()
            })
            .collect()
    }
}

#[inline]
pub fn contains(mask: usize, user: usize) -> bool {
    mask & (1 << user) != 0
}

pub fn demand_table_from_model(demand: &DemandModel, users: usize) -> Result<DemandTable> {
    let size = 1usize
        .checked_shl(users as u32)
        .filter(|_| users < usize::BITS as usize)
        .ok_or_else(|| Error::InvalidArgument(format!("{users} users is too many")))?;
    let probs = match demand {
        DemandModel::Independent { marginals } => {
            if marginals.len() != users {
                return Err(Error::Dimension(format!(
                    "{} marginals for {users} users",
                    marginals.len()
                )));
            }
            if let Some(p) = marginals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidArgument(format!(
                    "marginal {p} outside [0, 1]"
                )));
            }
            (0..size)
                .map(|mask| {
                    marginals
                        .iter()
                        .enumerate()
                        .map(|(n, &p)| if contains(mask, n) { p } else { 1.0 - p })
                        .product()
                })
                .collect()
        }
        DemandModel::Joint { probs } => {
            if probs.len() != size {
                return Err(Error::Dimension(format!(
                    "joint demand table has {} entries, expected {size}",
                    probs.len()
                )));
            }
            probs.clone()
        }
    };
    Ok(DemandTable { users, probs })
}

/// `P_c(g | s)` for every slot index of the period.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTable {
    radices: Vec<usize>,
    gains: Vec<Vec<f64>>,
    slots: Vec<Vec<f64>>,
}

impl ChannelTable {
    pub fn period(&self) -> usize {
        self.slots.len()
    }

    pub fn users(&self) -> usize {
        self.radices.len()
    }

    /// Number of joint channel vectors, `Π_n K_n`.
    pub fn len(&self) -> usize {
        self.radices.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn slot(&self, s: usize) -> &[f64] {
        &self.slots[s]
    }

    /// Decodes a flat channel index into per-user state indices (0-based).
    pub fn tuple(&self, mut index: usize) -> Vec<usize> {
        let mut t = vec![0; self.radices.len()];
        for (n, &r) in self.radices.iter().enumerate().rev() {
            t[n] = index % r;
            index /= r;
        }
        t
    }

    pub fn index_of(&self, tuple: &[usize]) -> usize {
        tuple
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&k, &r)| acc * r + k)
    }

    /// Gain vector for a flat channel index.
    pub fn gain_vector(&self, index: usize) -> Vec<f64> {
        self.tuple(index)
            .into_iter()
            .enumerate()
            .map(|(n, k)| self.gains[n][k])
            .collect()
    }

    /// All gain vectors in flat index order.
    pub fn gain_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.gain_vector(i)).collect()
    }

    /// Marginal state probabilities of `user` at slot `s`.
    pub fn marginal(&self, s: usize, user: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.radices[user]];
        for (i, &p) in self.slots[s].iter().enumerate() {
            out[self.tuple(i)[user]] += p;
        }
        out
    }

    /// Uniform average over the period, i.e. the time-invariant `P_c(g)`.
    pub fn time_averaged(&self) -> ChannelTable {
        let q = self.period() as f64;
        let mut avg = vec![0.0; self.len()];
        for slot in &self.slots {
            for (a, p) in avg.iter_mut().zip(slot) {
                *a += p / q;
            }
        }
        ChannelTable {
            radices: self.radices.clone(),
            gains: self.gains.clone(),
            slots: vec![avg],
        }
    }
}

/// `P_c(g|s)` for one slot index.
pub fn channel_table_from_model(channel: &ChannelModel, s: usize) -> Result<Vec<f64>> {
    let period = channel.period();
    let slot = channel
        .slots()
        .get(s)
        .ok_or(Error::SlotOutOfRange { slot: s, period })?;
    let radices: Vec<usize> = channel.states().iter().map(|c| c.len()).collect();
    let size: usize = radices.iter().product();
    match slot {
        SlotChannel::Independent { probs } => {
            if probs.len() != radices.len()
                || probs.iter().zip(&radices).any(|(p, &k)| p.len() != k)
            {
                return Err(Error::Dimension(format!(
                    "slot {s} probabilities do not match the state spaces"
                )));
            }
            let mut out = vec![1.0; size];
            for (i, o) in out.iter_mut().enumerate() {
                let mut rest = i;
                for n in (0..radices.len()).rev() {
                    *o *= probs[n][rest % radices[n]];
                    rest /= radices[n];
                }
            }
            Ok(out)
        }
        SlotChannel::Joint { probs } => {
            if probs.len() != size {
                return Err(Error::Dimension(format!(
                    "slot {s} joint table has {} entries, expected {size}",
                    probs.len()
                )));
            }
            Ok(probs.clone())
        }
    }
}

/// Builds every slot of the period.
pub fn channel_table(channel: &ChannelModel) -> Result<ChannelTable> {
    let slots = (0..channel.period())
        .map(|s| channel_table_from_model(channel, s))
        .collect::<Result<_>>()?;
    Ok(ChannelTable {
        radices: channel.states().iter().map(|c| c.len()).collect(),
        gains: channel.states().iter().map(|c| c.gains().to_vec()).collect(),
        slots,
    })
}

/// `P_s(s) = 1/Q` for every slot index.
pub fn slot_distribution(period: usize) -> Result<Vec<f64>> {
    if period == 0 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    Ok(vec![1.0 / period as f64; period])
}

/// Both tables for a validated scenario.
#[derive(Debug, Clone)]
pub struct Tables {
    pub demand: DemandTable,
    pub channel: ChannelTable,
}

impl Tables {
    pub fn build(scenario: &Scenario) -> Result<Self> {
        scenario.ensure_valid()?;
        Ok(Self {
            demand: demand_table_from_model(&scenario.demand, scenario.users())?,
            channel: channel_table(&scenario.channel)?,
        })
    }
}
