//! Scenario files in TOML (default) or JSON.
//!
//! ```toml
//! users = 2
//! service_size = 1.0
//!
//! [demand]
//! marginals = [0.42, 0.42]          # or: joint = { "0" = 0.25, "0b01" = 0.25, ... }
//!
//! [channel]
//! period = 1
//! states = [[0.5, 2.0], [0.5, 2.0]] # gains per user, worst first
//! probs = [[[0.54, 0.46], [0.54, 0.46]]]   # probs[slot][user][k]
//!
//! [cost]
//! family = "poly"
//! exponent = 4
//! ```
//!
//! Instead of `probs` the channel may give `joint = [[..]]` (one distribution
//! over gain tuples per slot, user 0 most significant) or `profile = [[..]]`
//! (one per-slot distribution shared by every user, as written by trace
//! ingestion). Joint-demand keys are subset bitmasks in decimal or `0b`
//! binary, bit `n` set when user `n` requests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelModel, ChannelStateSpace, CostFunction, DemandModel, Scenario, SlotChannel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub users: usize,
    #[serde(default = "one")]
    pub service_size: f64,
    pub demand: DemandConfig,
    pub channel: ChannelConfig,
    #[serde(default)]
    pub cost: CostConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginals: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    pub states: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub family: String,
    pub exponent: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            family: "poly".into(),
            exponent: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    /// JSON for `.json` files, TOML otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

pub fn parse_mask(key: &str) -> Result<usize> {
    let key = key.trim();
    let parsed = match key.strip_prefix("0b") {
        Some(bits) => usize::from_str_radix(bits, 2),
        None => key.parse(),
    };
    parsed.map_err(|_| Error::Config(format!("invalid subset bitmask `{key}`")))
}

impl ScenarioConfig {
    pub fn parse(text: &str, format: Format) -> Result<Self> {
        match format {
            Format::Toml => toml::from_str(text).map_err(|e| Error::Config(e.to_string())),
            Format::Json => serde_json::from_str(text).map_err(|e| Error::Config(e.to_string())),
        }
    }

    pub fn to_text(&self, format: Format) -> Result<String> {
        match format {
            Format::Toml => toml::to_string(self).map_err(|e| Error::Config(e.to_string())),
            Format::Json => serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string())),
        }
    }

    /// Builds the scenario. Structural problems are config errors; value
    /// problems (probabilities, gains) are reported by validation.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let users = self.users;
        let demand = match (&self.demand.marginals, &self.demand.joint) {
            (Some(m), None) => DemandModel::independent(m.clone()),
            (None, Some(j)) => {
                let size = 1usize
                    .checked_shl(users as u32)
                    .ok_or_else(|| Error::Config(format!("too many users ({users})")))?;
                let mut probs = vec![0.0; size];
                for (key, &p) in j {
                    let mask = parse_mask(key)?;
                    if mask >= size {
                        return Err(Error::Config(format!(
                            "bitmask {key} names a user beyond {users}"
                        )));
                    }
                    probs[mask] = p;
                }
                DemandModel::joint(probs)
            }
            _ => {
                return Err(Error::Config(
                    "demand needs exactly one of `marginals` or `joint`".into(),
                ))
            }
        };

        let ch = &self.channel;
        if ch.states.len() != users {
            return Err(Error::Config(format!(
                "channel.states lists {} users, expected {users}",
                ch.states.len()
            )));
        }
        let slots: Vec<SlotChannel> = match (&ch.probs, &ch.joint, &ch.profile) {
            (Some(p), None, None) => p
                .iter()
                .map(|slot| SlotChannel::Independent { probs: slot.clone() })
                .collect(),
            (None, Some(j), None) => j
                .iter()
                .map(|slot| SlotChannel::Joint { probs: slot.clone() })
                .collect(),
            (None, None, Some(p)) => p
                .iter()
                .map(|slot| SlotChannel::Independent {
                    probs: vec![slot.clone(); users],
                })
                .collect(),
            _ => {
                return Err(Error::Config(
                    "channel needs exactly one of `probs`, `joint` or `profile`".into(),
                ))
            }
        };
        if let Some(q) = ch.period {
            if q != slots.len() {
                return Err(Error::Config(format!(
                    "channel.period is {q} but {} slots are given",
                    slots.len()
                )));
            }
        }
        let states = ch.states.iter().map(|g| ChannelStateSpace::new(g.clone())).collect();

        if self.cost.family != "poly" {
            return Err(Error::Config(format!(
                "unknown cost family `{}` (expected `poly`)",
                self.cost.family
            )));
        }
        Ok(Scenario::new(
            self.service_size,
            demand,
            ChannelModel::new(states, slots),
            CostFunction::polynomial(self.cost.exponent),
        ))
    }

    /// Inverse of [`to_scenario`](Self::to_scenario); custom costs cannot be
    /// written out.
    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        let users = scenario.users();
        let demand = match &scenario.demand {
            DemandModel::Independent { marginals } => DemandConfig {
                marginals: Some(marginals.clone()),
                joint: None,
            },
            DemandModel::Joint { probs } => DemandConfig {
                marginals: None,
                joint: Some(
                    probs
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p != 0.0)
                        .map(|(m, &p)| (m.to_string(), p))
                        .collect(),
                ),
            },
        };
        let slots = scenario.channel.slots();
        let all_independent = slots.iter().all(|s| matches!(s, SlotChannel::Independent { .. }));
        let (probs, joint) = if all_independent {
            let p = slots
                .iter()
                .map(|s| match s {
                    SlotChannel::Independent { probs } => probs.clone(),
                    SlotChannel::Joint { .. } => unreachable!(),
                })
                .collect();
            (Some(p), None)
        } else {
            let tables = (0..slots.len())
                .map(|s| crate::stats::channel_table_from_model(&scenario.channel, s))
                .collect::<Result<Vec<_>>>()?;
            (None, Some(tables))
        };
        let cost = match &scenario.cost {
            CostFunction::Polynomial { exponent } => CostConfig {
                family: "poly".into(),
                exponent: *exponent,
            },
            CostFunction::Custom(_) => {
                return Err(Error::Config("custom cost functions cannot be serialized".into()))
            }
        };
        Ok(Self {
            users,
            service_size: scenario.service_size,
            demand,
            channel: ChannelConfig {
                period: Some(slots.len()),
                states: scenario
                    .channel
                    .states()
                    .iter()
                    .map(|s| s.gains().to_vec())
                    .collect(),
                probs,
                joint,
                profile: None,
            },
            cost,
        })
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let scenario = ScenarioConfig::parse(&text, Format::from_path(path))?.to_scenario()?;
    scenario.ensure_valid()?;
    Ok(scenario)
}

pub fn scenario_from_str(text: &str, format: Format) -> Result<Scenario> {
    let scenario = ScenarioConfig::parse(text, format)?.to_scenario()?;
    scenario.ensure_valid()?;
    Ok(scenario)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = ScenarioConfig::from_scenario(scenario)?.to_text(Format::from_path(path))?;
    std::fs::write(path, text)?;
    Ok(())
}
