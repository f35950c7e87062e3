#![allow(dead_code)]

use proactive_core::model::{ChannelModel, ChannelStateSpace, CostFunction, DemandModel, Scenario, SlotChannel};
use proactive_core::sim::SlotRng;
use proactive_core::solver::{BoundModel, Problem};

/// Random scenario with `users` users, 2 or 3 states each and the given
/// period. Probabilities are bounded away from zero so no cell is pinned.
pub fn random_scenario(rng: &mut SlotRng, users: usize, period: usize) -> Scenario {
    let states: Vec<ChannelStateSpace> = (0..users)
        .map(|_| {
            let k = 2 + (rng.uniform() < 0.3) as usize;
            let mut g = 0.3 + rng.uniform();
            let gains = (0..k)
                .map(|_| {
                    let v = g;
                    g += 0.2 + 1.5 * rng.uniform();
                    v
                })
                .collect();
            ChannelStateSpace::new(gains)
        })
        .collect();
    let slots = (0..period)
        .map(|_| SlotChannel::Independent {
            probs: states.iter().map(|s| simplex(rng, s.len())).collect(),
        })
        .collect();
    let demand = DemandModel::independent((0..users).map(|_| 0.05 + 0.9 * rng.uniform()).collect());
    let exponent = [2.0, 3.0, 4.0][(rng.uniform() * 3.0) as usize % 3];
    Scenario::new(
        0.5 + rng.uniform(),
        demand,
        ChannelModel::new(states, slots),
        CostFunction::polynomial(exponent),
    )
}

pub fn simplex(rng: &mut SlotRng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| 0.1 + rng.uniform()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

pub fn interior_point(rng: &mut SlotRng, dim: usize, upper: f64) -> Vec<f64> {
    (0..dim).map(|_| upper * (0.05 + 0.9 * rng.uniform())).collect()
}

/// Largest relative deviation between the analytic gradient and central
/// differences with step `h`, over every coordinate.
pub fn gradient_error(problem: &Problem<'_>, x: &[f64], h: f64) -> f64 {
    let mut g = vec![0.0; x.len()];
    problem.gradient(x, &mut g).unwrap();
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-6);
    let mut xp = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = problem.value(&xp).unwrap();
        xp[i] = x[i] - h;
        let fm = problem.value(&xp).unwrap();
        xp[i] = x[i];
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / scale);
    }
    worst
}

pub fn all_models(window: usize) -> [BoundModel; 3] {
    [BoundModel::TimeInvariant, BoundModel::TimeVarying, BoundModel::General { window }]
}
