//! Flat text format for `μ̃` tables, used for bound solutions and compiled
//! policies.
//!
//! ```text
//! # index order: user, subset bitmask, channel tuple, s, s'
//! format = proactive-table-1
//! content = solution
//! table = tv
//! users = 2
//! ...
//! values = 3136
//! ---
//! 0.4812...
//! ```
//!
//! Header lines are `key = value`; `#` starts a comment. After `---` come
//! exactly `values` numbers, one per line, flattened user-major, then subset
//! bitmask, then channel tuple (user 0 most significant), then `s`, then `s'`.
//! Numbers are written in shortest round-trip form, so a write/read cycle is
//! lossless.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::policy::{PolicyKind, PolicyTable};
use crate::solver::{
    BoundModel, LowerBoundSolution, MuTable, MuTableTi, MuTableTv, SolverDiagnostics,
};

const MAGIC: &str = "proactive-table-1";

fn header(out: &mut String, pairs: &[(&str, String)]) {
    out.push_str("# index order: user, subset bitmask, channel tuple, s, s'\n");
    let _ = writeln!(out, "format = {MAGIC}");
    for (k, v) in pairs {
        let _ = writeln!(out, "{k} = {v}");
    }
}

fn body(out: &mut String, values: &[f64]) {
    let _ = writeln!(out, "values = {}", values.len());
    out.push_str("---\n");
    for v in values {
        let _ = writeln!(out, "{v}");
    }
}

pub fn solution_to_string(solution: &LowerBoundSolution) -> String {
    let mu = &solution.mu;
    let table = match mu {
        MuTable::Ti(_) => "ti",
        MuTable::Tv(_) => "tv",
    };
    let mut pairs = vec![
        ("content", "solution".to_string()),
        ("model", solution.model.name().to_string()),
    ];
    if let BoundModel::General { window } = solution.model {
        pairs.push(("window", window.to_string()));
    }
    let d = &solution.diagnostics;
    pairs.extend([
        ("table", table.to_string()),
        ("users", mu.users().to_string()),
        ("subsets", mu.subsets().to_string()),
        ("channels", mu.channels().to_string()),
        ("period", mu.period().to_string()),
        ("service_size", solution.service_size.to_string()),
        ("bound", solution.bound.to_string()),
        ("iterations", d.iterations.to_string()),
        ("projected_gradient_norm", d.projected_gradient_norm.to_string()),
        ("converged", d.converged.to_string()),
        ("stalled", d.stalled.to_string()),
    ]);
    let mut out = String::new();
    header(&mut out, &pairs);
    body(&mut out, mu.values());
    out
}

pub fn policy_to_string(policy: &PolicyTable) -> String {
    let pairs = [
        ("content", "policy".to_string()),
        ("kind", policy.kind.name().to_string()),
        ("window", policy.window.to_string()),
        ("users", policy.users.to_string()),
        ("subsets", policy.subsets.to_string()),
        ("channels", policy.channels.to_string()),
        ("period", policy.period.to_string()),
        ("service_size", policy.service_size.to_string()),
    ];
    let mut out = String::new();
    header(&mut out, &pairs);
    body(&mut out, &policy.mu);
    out
}

struct Parsed {
    keys: BTreeMap<String, String>,
    values: Vec<f64>,
}

impl Parsed {
    fn get(&self, key: &str) -> Result<&str> {
        self.keys
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::TableFormat(format!("missing header key `{key}`")))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Error::TableFormat(format!("bad value `{v}` for `{key}`")))
    }
}

fn parse(text: &str) -> Result<Parsed> {
    let mut keys = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    let mut saw_separator = false;
    for (_, line) in lines.by_ref() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "---" {
            saw_separator = true;
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::TableFormat(format!("expected `key = value`, got `{line}`")))?;
        keys.insert(k.trim().to_string(), v.trim().to_string());
    }
    if !saw_separator {
        return Err(Error::TableFormat("missing `---` separator".into()));
    }
    if keys.get("format").map(String::as_str) != Some(MAGIC) {
        return Err(Error::TableFormat(format!("not a `{MAGIC}` file")));
    }
    let mut values = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::TableFormat(format!("line {}: bad number `{line}`", i + 1)))?;
        values.push(v);
    }
    let p = Parsed { keys, values };
    let expected: usize = p.num("values")?;
    if p.values.len() != expected {
        return Err(Error::TableFormat(format!(
            "header announces {expected} values, found {}",
            p.values.len()
        )));
    }
    Ok(p)
}

pub fn solution_from_str(text: &str) -> Result<LowerBoundSolution> {
    let p = parse(text)?;
    if p.get("content")? != "solution" {
        return Err(Error::TableFormat("file holds a policy, not a solution".into()));
    }
    let model = match p.get("model")? {
        "ti" => BoundModel::TimeInvariant,
        "tv" => BoundModel::TimeVarying,
        "tv-general" => BoundModel::General {
            window: p.num("window")?,
        },
        other => return Err(Error::TableFormat(format!("unknown model `{other}`"))),
    };
    let (users, subsets, channels, period) = (
        p.num("users")?,
        p.num("subsets")?,
        p.num("channels")?,
        p.num::<usize>("period")?,
    );
    let mu = match p.get("table")? {
        "ti" => MuTable::Ti(MuTableTi {
            users,
            subsets,
            channels,
            values: p.values.clone(),
        }),
        "tv" => MuTable::Tv(MuTableTv {
            users,
            subsets,
            channels,
            period,
            values: p.values.clone(),
        }),
        other => return Err(Error::TableFormat(format!("unknown table kind `{other}`"))),
    };
    let q2 = if matches!(mu, MuTable::Tv(_)) { period * period } else { 1 };
    if users * subsets * channels * q2 != p.values.len() {
        return Err(Error::TableFormat("dimensions do not match value count".into()));
    }
    Ok(LowerBoundSolution {
        model,
        service_size: p.num("service_size")?,
        mu,
        bound: p.num("bound")?,
        diagnostics: SolverDiagnostics {
            iterations: p.num("iterations")?,
            projected_gradient_norm: p.num("projected_gradient_norm")?,
            converged: p.num("converged")?,
            stalled: p.num("stalled")?,
        },
    })
}

pub fn policy_from_str(text: &str) -> Result<PolicyTable> {
    let p = parse(text)?;
    if p.get("content")? != "policy" {
        return Err(Error::TableFormat("file holds a solution, not a policy".into()));
    }
    let kind = PolicyKind::parse(p.get("kind")?)
        .ok_or_else(|| Error::TableFormat(format!("unknown policy kind `{}`", p.get("kind").unwrap_or(""))))?;
    let table = PolicyTable {
        kind,
        window: p.num("window")?,
        period: p.num("period")?,
        users: p.num("users")?,
        subsets: p.num("subsets")?,
        channels: p.num("channels")?,
        service_size: p.num("service_size")?,
        mu: p.values,
    };
    table.check()?;
    Ok(table)
}

pub fn write_solution(path: impl AsRef<Path>, solution: &LowerBoundSolution) -> Result<()> {
    std::fs::write(path, solution_to_string(solution))?;
    Ok(())
}

pub fn read_solution(path: impl AsRef<Path>) -> Result<LowerBoundSolution> {
    solution_from_str(&std::fs::read_to_string(path)?)
}

pub fn write_policy(path: impl AsRef<Path>, policy: &PolicyTable) -> Result<()> {
    std::fs::write(path, policy_to_string(policy))?;
    Ok(())
}

pub fn read_policy(path: impl AsRef<Path>) -> Result<PolicyTable> {
    policy_from_str(&std::fs::read_to_string(path)?)
}
