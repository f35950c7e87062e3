//! Grid-search reference for the lower-bound optimizations.
//!
//! Search proceeds in levels. Level 0 enumerates every point of a coarse
//! grid over the whole box. Each later level halves the step and enumerates a
//! window of two old steps around the incumbent, until the step reaches the
//! requested resolution. A last pass at `resolution / 10` covers half a
//! resolution step around the incumbent. Pinned (zero-probability) variables
//! stay at 0 and are not enumerated.

use super::objective::{BoundModel, Problem};
use crate::error::{Error, Result};
use crate::model::Scenario;

/// Largest number of free (unpinned) variables the oracle accepts.
pub const ORACLE_MAX_DIM: usize = 6;

const COARSE_DIVISIONS: usize = 8;

pub fn brute_force_bound(scenario: &Scenario, model: BoundModel, resolution: f64) -> Result<f64> {
    let problem = Problem::new(scenario, model)?;
    let dim = problem.dim();
    let upper = problem.service_size();
    if !(resolution > 0.0 && resolution <= upper) {
        return Err(Error::InvalidArgument(format!(
            "resolution {resolution} must lie in (0, {upper}]"
        )));
    }
    let free: Vec<usize> = problem
        .pinned()
        .iter()
        .enumerate()
        .filter(|(_, &p)| !p)
        .map(|(i, _)| i)
        .collect();
    if free.len() > ORACLE_MAX_DIM {
        return Err(Error::OracleDimension {
            dim: free.len(),
            limit: ORACLE_MAX_DIM,
        });
    }
    let mut best_x = vec![0.0; dim];
    if free.is_empty() {
        return problem.value(&best_x);
    }

    let coarse = (upper / COARSE_DIVISIONS as f64).max(resolution);
    let axes: Vec<Vec<f64>> = free.iter().map(|_| axis(0.0, upper, coarse, upper)).collect();
    let mut best = search(&problem, &free, &axes, &mut best_x);

    let mut step = coarse;
    while step > resolution {
        let next = (step / 2.0).max(resolution);
        let axes: Vec<Vec<f64>> = free
            .iter()
            .map(|&i| axis(best_x[i] - 2.0 * step, best_x[i] + 2.0 * step, next, upper))
            .collect();
        best = best.min(search(&problem, &free, &axes, &mut best_x));
        step = next;
    }

    let fine = resolution / 10.0;
    let axes: Vec<Vec<f64>> = free
        .iter()
        .map(|&i| axis(best_x[i] - 0.5 * resolution, best_x[i] + 0.5 * resolution, fine, upper))
        .collect();
    best = best.min(search(&problem, &free, &axes, &mut best_x));
    Ok(best)
}

/// Grid points `lo, lo + step, ..` clipped to `[0, upper]`, centered so the
/// incumbent is always on the grid.
fn axis(lo: f64, hi: f64, step: f64, upper: f64) -> Vec<f64> {
    let center = 0.5 * (lo + hi);
    let half = ((hi - lo) / (2.0 * step)).round() as i64;
    let mut out: Vec<f64> = (-half..=half)
        .map(|k| center + k as f64 * step)
        .filter(|x| *x >= -1e-12 && *x <= upper + 1e-12)
        .map(|x| x.clamp(0.0, upper))
        .collect();
    for end in [0.0, upper] {
        if (lo..=hi).contains(&end) && !out.iter().any(|x| (*x - end).abs() < 1e-15) {
            out.push(end);
        }
    }
    out
}

/// Exhaustive search over the Cartesian product of `axes`. Updates `best_x`
/// when a strictly better point is found and returns the best value seen.
fn search(problem: &Problem<'_>, free: &[usize], axes: &[Vec<f64>], best_x: &mut [f64]) -> f64 {
    let mut x = best_x.to_vec();
    let mut best = problem.value(best_x).expect("dimension fixed");
    let mut counter = vec![0usize; axes.len()];
    if axes.iter().any(|a| a.is_empty()) {
        return best;
    }
    loop {
        for (j, &i) in free.iter().enumerate() {
            x[i] = axes[j][counter[j]];
        }
        let v = problem.value(&x).expect("dimension fixed");
        if v < best {
            best = v;
            best_x.copy_from_slice(&x);
        }
        let mut j = 0;
        loop {
            if j == counter.len() {
                return best;
            }
            counter[j] += 1;
            if counter[j] < axes[j].len() {
                break;
            }
            counter[j] = 0;
            j += 1;
        }
    }
}
