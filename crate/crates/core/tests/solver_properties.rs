mod common;

use approx::assert_abs_diff_eq;
use proactive_core::experiments::single_user;
use proactive_core::model::{ChannelModel, CostFunction, DemandModel, Scenario, SlotChannel};
use proactive_core::sim::{self, SlotRng};
use proactive_core::solver::{
    self, brute_force_bound, objective_ti, objective_tv, objective_tv_general, BoundModel, MuTable,
    Problem, SolverOptions,
};
use proptest::prelude::*;

/// Independent per-slot channel probabilities of a scenario built by
/// `random_scenario`, as `probs[s][n][k]`.
fn slot_probs(s: &Scenario) -> Vec<Vec<Vec<f64>>> {
    s.channel
        .slots()
        .iter()
        .map(|slot| match slot {
            SlotChannel::Independent { probs } => probs.clone(),
            SlotChannel::Joint { .. } => panic!("independent channels only"),
        })
        .collect()
}

fn marginals(s: &Scenario) -> Vec<f64> {
    match &s.demand {
        DemandModel::Independent { marginals } => marginals.clone(),
        DemandModel::Joint { .. } => panic!("independent demand only"),
    }
}

/// All channel index tuples, user 0 most significant.
fn tuples(radices: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &k in radices {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..k).map(move |j| {
                    let mut t = t.clone();
                    t.push(j);
                    t
                })
            })
            .collect();
    }
    out
}

fn poly_exponent(s: &Scenario) -> f64 {
    match s.cost {
        CostFunction::Polynomial { exponent } => exponent,
        CostFunction::Custom(_) => panic!("polynomial cost only"),
    }
}

/// Direct evaluation of the general-window objective, walking `τ = 1..=T`
/// explicitly instead of through a weight matrix.
fn reference_general(s: &Scenario, mu: &[f64], window: usize) -> f64 {
    let n_users = s.users();
    let q = s.period();
    let pi = marginals(s);
    let probs = slot_probs(s);
    let gains: Vec<Vec<f64>> = s.channel.states().iter().map(|c| c.gains().to_vec()).collect();
    let radices: Vec<usize> = gains.iter().map(Vec::len).collect();
    let gs = tuples(&radices);
    let subsets = 1usize << n_users;
    let idx = |n: usize, b: usize, g: usize, a: usize, t: usize| (((n * subsets + b) * gs.len() + g) * q + a) * q + t;
    let pd = |b: usize| -> f64 {
        (0..n_users)
            .map(|n| if b >> n & 1 == 1 { pi[n] } else { 1.0 - pi[n] })
            .product()
    };
    let pc = |a: usize, g: &[usize]| -> f64 { g.iter().enumerate().map(|(n, &k)| probs[a][n][k]).product() };
    let p = poly_exponent(s);
    let tf = window as f64;

    // mean pre-service reaching slot s, averaged over the source slot
    let mean = |n: usize, s_to: usize| -> f64 {
        let mut acc = 0.0;
        for tau in 1..=window {
            let a = (s_to + q * window - tau) % q;
            for (gi, g) in gs.iter().enumerate() {
                for b in 0..subsets {
                    acc += pc(a, g) * pd(b) * mu[idx(n, b, gi, a, s_to)];
                }
            }
        }
        acc / tf
    };

    let mut total = 0.0;
    for slot in 0..q {
        let mbar: Vec<f64> = (0..n_users).map(|n| mean(n, slot)).collect();
        for (gi, g) in gs.iter().enumerate() {
            for b in 0..subsets {
                let w = pc(slot, g) * pd(b) / q as f64;
                let mut c = 0.0;
                for n in 0..n_users {
                    let carried = if b >> n & 1 == 1 { s.service_size - mbar[n] } else { 0.0 };
                    let ahead: f64 =
                        (1..=window).map(|tau| mu[idx(n, b, gi, slot, (slot + tau) % q)]).sum::<f64>() / tf;
                    c += (carried + ahead).powf(p) / gains[n][g[n]];
                }
                total += w * c;
            }
        }
    }
    total
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = SlotRng::new(11, 0);
    for (m, label) in ["ti", "tv", "tv-general"].iter().enumerate() {
        let mut worst = 0.0f64;
        for i in 0..100 {
            let s = common::random_scenario(&mut rng, 1 + i % 2, 1 + i % 3);
            let model = common::all_models(1 + i % 7)[m];
            let p = Problem::new(&s, model).unwrap();
            let x = common::interior_point(&mut rng, p.dim(), s.service_size);
            worst = worst.max(common::gradient_error(&p, &x, 1e-6));
        }
        assert!(worst <= 1e-4, "{label}: relative error {worst:e}");
    }
}

#[test]
fn objectives_are_midpoint_convex() {
    let mut rng = SlotRng::new(12, 0);
    for i in 0..150 {
        let s = common::random_scenario(&mut rng, 1 + i % 3, 1 + i % 2);
        let p = Problem::new(&s, common::all_models(1 + i % 4)[i % 3]).unwrap();
        let a: Vec<f64> = (0..p.dim()).map(|_| s.service_size * rng.uniform()).collect();
        let b: Vec<f64> = (0..p.dim()).map(|_| s.service_size * rng.uniform()).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let (fa, fb, fm) = (p.value(&a).unwrap(), p.value(&b).unwrap(), p.value(&mid).unwrap());
        assert!(fm <= 0.5 * (fa + fb) + 1e-12, "case {i}: {fm} > mean of {fa}, {fb}");
    }
}

#[test]
fn general_objective_matches_direct_sum() {
    let mut rng = SlotRng::new(13, 0);
    for i in 0..30 {
        let q = 1 + i % 3;
        let s = common::random_scenario(&mut rng, 1 + i % 2, q);
        let window = 1 + i % 5;
        let p = Problem::new(&s, BoundModel::General { window }).unwrap();
        let x = common::interior_point(&mut rng, p.dim(), s.service_size);
        let direct = reference_general(&s, &x, window);
        assert_abs_diff_eq!(objective_tv_general(&x, &s, window).unwrap(), direct, epsilon = 1e-12);
    }
}

#[test]
fn q2_t3_hand_enumeration() {
    // N = 1, certain demand, one state per slot; only the B = {0} rows matter
    let s = Scenario::new(
        1.0,
        DemandModel::independent(vec![1.0]),
        ChannelModel::new(
            vec![proactive_core::model::ChannelStateSpace::new(vec![1.0])],
            vec![
                SlotChannel::Independent { probs: vec![vec![1.0]] },
                SlotChannel::Independent { probs: vec![vec![1.0]] },
            ],
        ),
        CostFunction::polynomial(2.0),
    );
    // layout (n, B, g, s, s'): B = 1 rows at offsets 4..8
    let mut mu = vec![0.0; 8];
    let (a00, a01, a10, a11) = (0.1, 0.4, 0.3, 0.2);
    mu[4..8].copy_from_slice(&[a00, a01, a10, a11]);
    // from s = 0, τ = 1, 2, 3 visit 1, 0, 1; from s = 1 they visit 0, 1, 0
    let ahead0 = (2.0 * a01 + a00) / 3.0;
    let ahead1 = (2.0 * a10 + a11) / 3.0;
    let mean0 = (a00 + 2.0 * a10) / 3.0;
    let mean1 = (2.0 * a01 + a11) / 3.0;
    let l0 = 1.0 - mean0 + ahead0;
    let l1 = 1.0 - mean1 + ahead1;
    let expected = 0.5 * (l0 * l0 + l1 * l1);
    assert_abs_diff_eq!(objective_tv_general(&mu, &s, 3).unwrap(), expected, epsilon = 1e-15);
}

#[test]
fn reductions_hold_exactly() {
    let mut rng = SlotRng::new(14, 0);
    for i in 0..40 {
        let one = common::random_scenario(&mut rng, 1 + i % 3, 1);
        let dim = Problem::new(&one, BoundModel::TimeInvariant).unwrap().dim();
        let x = common::interior_point(&mut rng, dim, one.service_size);
        assert_abs_diff_eq!(objective_ti(&x, &one).unwrap(), objective_tv(&x, &one).unwrap(), epsilon = 1e-12);

        let q = 2 + i % 3;
        let many = common::random_scenario(&mut rng, 1 + i % 2, q);
        let dim = Problem::new(&many, BoundModel::TimeVarying).unwrap().dim();
        let x = common::interior_point(&mut rng, dim, many.service_size);
        let tv = objective_tv(&x, &many).unwrap();
        for l in 1..=3 {
            assert_abs_diff_eq!(objective_tv_general(&x, &many, l * q).unwrap(), tv, epsilon = 1e-12);
        }
    }
}

#[test]
fn zero_table_is_the_reactive_cost() {
    let mut rng = SlotRng::new(15, 0);
    for i in 0..30 {
        let s = common::random_scenario(&mut rng, 1 + i % 3, 1 + i % 4);
        let reactive = sim::reactive_cost(&s).unwrap();
        let p = Problem::new(&s, BoundModel::TimeVarying).unwrap();
        assert_abs_diff_eq!(p.value(&vec![0.0; p.dim()]).unwrap(), reactive, epsilon = 1e-12);
        let g = Problem::new(&s, BoundModel::General { window: 1 + i }).unwrap();
        assert_abs_diff_eq!(g.value(&vec![0.0; g.dim()]).unwrap(), reactive, epsilon = 1e-12);
    }
}

fn alternating(exponent: f64) -> Scenario {
    Scenario::new(
        1.0,
        DemandModel::independent(vec![1.0]),
        ChannelModel::symmetric(1, &[1.0, 2.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]),
        CostFunction::polynomial(exponent),
    )
}

/// Pre-serving part of the bad slot's request during the good slot.
fn shifted(amount: f64) -> Vec<f64> {
    // (n, B, g, s, s') with 2 subsets, 2 channels, Q = 2
    let mut mu = vec![0.0; 16];
    for b in 0..2 {
        mu[((b * 2 + 1) * 2 + 1) * 2] = amount;
    }
    mu
}

#[test]
fn shifting_service_to_the_good_slot_helps() {
    let quad = alternating(2.0);
    let base = objective_tv(&[0.0; 16], &quad).unwrap();
    assert!(objective_tv(&shifted(0.5), &quad).unwrap() < base);

    let quartic = alternating(4.0);
    let base = objective_tv(&[0.0; 16], &quartic).unwrap();
    assert_abs_diff_eq!(base, 0.75, epsilon = 1e-15);
    assert!(objective_tv(&shifted(0.2), &quartic).unwrap() < base);
    let sol = solver::solve(BoundModel::TimeVarying, &quartic, &SolverOptions::default()).unwrap();
    assert!(sol.bound < base);
}

#[test]
fn bound_is_dominated_by_reactive() {
    let mut rng = SlotRng::new(16, 0);
    for i in 0..50 {
        let s = common::random_scenario(&mut rng, 1 + i % 3, 1 + i % 2);
        let reactive = sim::reactive_cost(&s).unwrap();
        for model in common::all_models(3) {
            let sol = solver::solve(model, &s, &SolverOptions::default()).unwrap();
            let zero = solver::reactive_objective(model, &s).unwrap();
            assert!(sol.bound <= zero + 1e-12, "case {i} {model:?}");
            // random scenarios have 0 < π̄ < 1, so the inequality is strict
            assert!(sol.bound < zero, "case {i} {model:?}");
            if model == BoundModel::TimeVarying || s.period() == 1 {
                assert!(zero <= reactive + 1e-12);
            }
            assert!(sol.mu.values().iter().all(|&v| (0.0..=s.service_size).contains(&v)));
            assert!(sol.diagnostics.converged, "case {i} {model:?}");
            let p = Problem::new(&s, model).unwrap();
            assert!((p.value(sol.mu.values()).unwrap() - sol.bound).abs() <= 1e-10);
        }
    }
}

#[test]
fn solve_is_bit_identical() {
    let mut rng = SlotRng::new(17, 0);
    let s = common::random_scenario(&mut rng, 2, 3);
    let a = solver::solve(BoundModel::General { window: 4 }, &s, &SolverOptions::default()).unwrap();
    let b = solver::solve(BoundModel::General { window: 4 }, &s, &SolverOptions::default()).unwrap();
    assert_eq!(a.bound.to_bits(), b.bound.to_bits());
    let bits = |m: &MuTable| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.mu), bits(&b.mu));
}

#[test]
fn oracle_agrees_with_solver() {
    let cases = [
        (0.5, [1.0, 2.0], 0.5),
        (0.3, [1.0, 3.0], 0.7),
        (0.9, [0.5, 2.0], 0.54),
        (1.0, [1.0, 2.0], 0.5),
    ];
    for (pi, g, psi) in cases {
        let s = single_user(pi, g, psi);
        let sol = solver::solve(BoundModel::TimeInvariant, &s, &SolverOptions::default()).unwrap();
        let oracle = brute_force_bound(&s, BoundModel::TimeInvariant, 1e-3).unwrap();
        assert!((sol.bound - oracle).abs() <= 1e-4, "{pi} {g:?} {psi}: {} vs {oracle}", sol.bound);
        assert!(sol.bound <= oracle + 1e-12);
    }
    // one cyclo-stationary case: certain demand, two slots with one state each
    let s = Scenario::new(
        1.0,
        DemandModel::independent(vec![1.0]),
        ChannelModel::symmetric(1, &[1.0, 2.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]),
        CostFunction::default(),
    );
    let sol = solver::solve(BoundModel::TimeVarying, &s, &SolverOptions::default()).unwrap();
    let oracle = brute_force_bound(&s, BoundModel::TimeVarying, 1e-3).unwrap();
    assert!((sol.bound - oracle).abs() <= 1e-4, "{} vs {oracle}", sol.bound);
}

#[test]
fn oracle_refinement_is_monotone() {
    let s = single_user(0.5, [1.0, 2.0], 0.5);
    let mut last = f64::INFINITY;
    for r in [0.1, 0.05, 0.025, 0.0125] {
        let v = brute_force_bound(&s, BoundModel::TimeInvariant, r).unwrap();
        assert!(v <= last + 1e-15, "resolution {r}: {v} > {last}");
        last = v;
    }
}

#[test]
fn no_demand_and_certain_bad_channel() {
    let opts = SolverOptions::default();
    let s = single_user(0.0, [1.0, 2.0], 0.4);
    let sol = solver::solve(BoundModel::TimeInvariant, &s, &opts).unwrap();
    assert_abs_diff_eq!(sol.bound, 0.0, epsilon = 1e-12);
    let s = single_user(1.0, [0.5, 2.0], 1.0);
    let sol = solver::solve(BoundModel::TimeInvariant, &s, &opts).unwrap();
    assert_abs_diff_eq!(sol.bound, 2.0, epsilon = 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dominance_on_random_two_state_users(
        pis in proptest::collection::vec(0.01f64..0.99, 1..=3),
        psi in 0.01f64..0.99,
        g2 in 1.1f64..5.0,
    ) {
        let n = pis.len();
        let s = Scenario::new(
            1.0,
            DemandModel::independent(pis),
            ChannelModel::symmetric(n, &[1.0, g2], &[vec![psi, 1.0 - psi]]),
            CostFunction::default(),
        );
        let sol = solver::solve(BoundModel::TimeInvariant, &s, &SolverOptions::default()).unwrap();
        prop_assert!(sol.bound < sim::reactive_cost(&s).unwrap());
        prop_assert!(sol.bound >= 0.0);
    }
}
