//! RSRP trace ingestion: parsing, quantization into channel states, and
//! estimation of per-slot state probabilities.
//!
//! Input CSV header: `pass_id,timestamp_s[,distance_m],rsrp_dbm`. Each
//! `pass_id` is one traversal of the same track.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ChannelModel, ChannelStateSpace, SlotChannel};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub pass_id: String,
    pub timestamp: f64,
    pub distance: Option<f64>,
    pub rsrp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseWarning {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrace {
    pub records: Vec<TraceRecord>,
    pub warnings: Vec<ParseWarning>,
}

const REQUIRED: [&str; 3] = ["pass_id", "timestamp_s", "rsrp_dbm"];

pub fn parse_trace(path: impl AsRef<Path>) -> Result<ParsedTrace> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Trace {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_trace_from(file, path)
}

pub fn parse_trace_from<R: std::io::Read>(reader: R, path: &Path) -> Result<ParsedTrace> {
    let err = |message: String| Error::Trace {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 3];
    for (slot, name) in idx.iter_mut().zip(REQUIRED) {
        *slot = column(name).ok_or_else(|| err(format!("missing column `{name}`")))?;
    }
    let [pass_col, time_col, rsrp_col] = idx;
    let dist_col = column("distance_m");

    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for row in rdr.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                warnings.push(ParseWarning {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or("");
        let number = |i: usize, name: &str| -> std::result::Result<f64, String> {
            field(i)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("invalid {name} `{}`", field(i)))
        };
        let parsed = (|| {
            let timestamp = number(time_col, "timestamp_s")?;
            let rsrp = number(rsrp_col, "rsrp_dbm")?;
            let distance = match dist_col {
                Some(c) => {
                    let d = number(c, "distance_m")?;
                    if d < 0.0 {
                        return Err(format!("negative distance_m `{d}`"));
                    }
                    Some(d)
                }
                None => None,
            };
            let pass_id = field(pass_col);
            if pass_id.is_empty() {
                return Err("empty pass_id".to_string());
            }
            Ok(TraceRecord {
                pass_id: pass_id.to_string(),
                timestamp,
                distance,
                rsrp,
            })
        })();
        match parsed {
            Ok(r) => records.push(r),
            Err(message) => warnings.push(ParseWarning { line, message }),
        }
    }
    if records.is_empty() {
        return Err(err("no valid rows".into()));
    }
    check_monotone(&records).map_err(err)?;
    Ok(ParsedTrace { records, warnings })
}

fn check_monotone(records: &[TraceRecord]) -> std::result::Result<(), String> {
    let mut last: BTreeMap<&str, f64> = BTreeMap::new();
    for r in records {
        if let Some(&prev) = last.get(r.pass_id.as_str()) {
            if r.timestamp < prev {
                return Err(format!(
                    "timestamps out of order in pass `{}` ({} after {prev})",
                    r.pass_id, r.timestamp
                ));
            }
        }
        last.insert(&r.pass_id, r.timestamp);
    }
    Ok(())
}

/// Decreasing dBm cut points; a value at a cut point belongs to the better
/// band above it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerThresholds {
    cuts: Vec<f64>,
}

impl Default for QuantizerThresholds {
    /// Excellent ≥ −80, good [−90, −80), mid cell [−100, −90), cell edge
    /// below −100 dBm.
    fn default() -> Self {
        Self {
            cuts: vec![-80.0, -90.0, -100.0],
        }
    }
}

impl QuantizerThresholds {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.iter().any(|c| !c.is_finite()) || cuts.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::InvalidArgument(
                "thresholds must be finite and strictly decreasing".into(),
            ));
        }
        Ok(Self { cuts })
    }

    pub fn states(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }
}

/// State index for an RSRP value, 1 = worst.
pub fn quantize_rsrp(rsrp: f64, thresholds: &QuantizerThresholds) -> usize {
    let above = thresholds.cuts.iter().filter(|&&c| rsrp >= c).count();
    1 + above
}

pub fn state_name(k: usize, states: usize) -> &'static str {
    if states != 4 {
        return "";
    }
    match k {
        1 => "cell edge",
        2 => "mid cell",
        3 => "good",
        4 => "excellent",
        _ => "",
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slotting {
    /// Seconds since the start of each pass.
    Time { slot_seconds: f64 },
    /// Meters along the track.
    Distance { slot_meters: f64 },
}

/// Per-slot state probabilities estimated from a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    /// `probs[s][k]` with `k = 0` the worst state.
    pub probs: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    /// Slots with no records, filled by interpolation.
    pub interpolated: Vec<usize>,
}

impl ChannelProfile {
    pub fn period(&self) -> usize {
        self.probs.len()
    }

    /// Uniform average over the period.
    pub fn time_averaged(&self) -> Vec<f64> {
        let q = self.probs.len() as f64;
        let k = self.probs[0].len();
        (0..k)
            .map(|j| self.probs.iter().map(|p| p[j]).sum::<f64>() / q)
            .collect()
    }

    /// Independent channel model for `users` identical users with the given
    /// gains (one per state, worst first).
    pub fn into_channel_model(&self, users: usize, gains: &[f64]) -> Result<ChannelModel> {
        if gains.len() != self.probs[0].len() {
            return Err(Error::Dimension(format!(
                "{} gains for {} states",
                gains.len(),
                self.probs[0].len()
            )));
        }
        let states = vec![ChannelStateSpace::new(gains.to_vec()); users];
        let slots = self
            .probs
            .iter()
            .map(|p| SlotChannel::Independent {
                probs: vec![p.clone(); users],
            })
            .collect();
        Ok(ChannelModel::new(states, slots))
    }

    /// Scenario-config fragment (`[channel]` table) plus a coverage report
    /// as comments.
    pub fn to_config_fragment(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# coverage: records per slot {:?}", self.counts);
        if !self.interpolated.is_empty() {
            let _ = writeln!(out, "# interpolated slots: {:?}", self.interpolated);
        }
        let _ = writeln!(out, "# supply `states` (one gain per state, worst first) per user");
        let _ = writeln!(out, "[channel]");
        let _ = writeln!(out, "period = {}", self.period());
        let _ = writeln!(out, "profile = [");
        for p in &self.probs {
            let row: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(out, "  [{}],", row.join(", "));
        }
        let _ = writeln!(out, "]");
        out
    }
}

pub fn slot_of(record: &TraceRecord, pass_start: f64, slotting: Slotting, period: usize) -> Result<usize> {
    let raw = match slotting {
        Slotting::Time { slot_seconds } => (record.timestamp - pass_start) / slot_seconds,
        Slotting::Distance { slot_meters } => {
            record.distance.ok_or_else(|| {
                Error::InvalidArgument("distance slotting needs a distance_m column".into())
            })? / slot_meters
        }
    };
    Ok((raw.floor() as usize) % period)
}

pub fn build_profile(
    records: &[TraceRecord],
    slotting: Slotting,
    period: usize,
    thresholds: &QuantizerThresholds,
) -> Result<ChannelProfile> {
    if period == 0 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    let len = match slotting {
        Slotting::Time { slot_seconds } => slot_seconds,
        Slotting::Distance { slot_meters } => slot_meters,
    };
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::InvalidArgument("slot length must be positive".into()));
    }
    let mut start: BTreeMap<&str, f64> = BTreeMap::new();
    for r in records {
        let e = start.entry(&r.pass_id).or_insert(r.timestamp);
        *e = e.min(r.timestamp);
    }
    let k = thresholds.states();
    let mut hist = vec![vec![0usize; k]; period];
    for r in records {
        let s = slot_of(r, start[r.pass_id.as_str()], slotting, period)?;
        hist[s][quantize_rsrp(r.rsrp, thresholds) - 1] += 1;
    }
    let counts: Vec<usize> = hist.iter().map(|h| h.iter().sum()).collect();
    let filled: Vec<usize> = (0..period).filter(|&s| counts[s] > 0).collect();
    if filled.is_empty() {
        return Err(Error::InvalidArgument("every slot is empty".into()));
    }
    let mut probs: Vec<Option<Vec<f64>>> = hist
        .iter()
        .zip(&counts)
        .map(|(h, &c)| (c > 0).then(|| h.iter().map(|&x| x as f64 / c as f64).collect()))
        .collect();
    let interpolated: Vec<usize> = (0..period).filter(|&s| counts[s] == 0).collect();
    let snapshot = probs.clone();
    for &s in &interpolated {
        // nearest non-empty slots on either side, cyclically
        let prev = (1..=period).map(|d| (s + period - d) % period).find(|&i| counts[i] > 0).unwrap();
        let next = (1..=period).map(|d| (s + d) % period).find(|&i| counts[i] > 0).unwrap();
        let dp = ((s + period - prev) % period) as f64;
        let dn = ((next + period - s) % period) as f64;
        let (a, b) = (snapshot[prev].as_ref().unwrap(), snapshot[next].as_ref().unwrap());
        let w = dp / (dp + dn);
        probs[s] = Some(a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y).collect());
    }
    Ok(ChannelProfile {
        probs: probs.into_iter().map(Option::unwrap).collect(),
        counts,
        interpolated,
    })
}
