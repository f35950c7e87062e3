mod common;

use proactive_core::experiments::{fig6_scenario, fig8_scenario, proactive_policy, single_user};
use proactive_core::policy::{compile_ti, PolicyKind, PolicyTable, StepOutcome};
use proactive_core::sim::{self, SimConfig, SlotDraw, SlotObserver};
use proactive_core::solver::{self, BoundModel, SolverOptions};

#[derive(Default)]
struct Recorder {
    loads: Vec<(usize, usize, Vec<f64>, f64)>,
}

impl SlotObserver for Recorder {
    fn observe(&mut self, r: usize, t: usize, _: SlotDraw, outcome: &StepOutcome, cost: f64) {
        self.loads.push((r, t, outcome.load.clone(), cost));
    }
}

fn config(horizon: usize, replications: usize, seed: u64) -> SimConfig {
    SimConfig {
        horizon,
        replications,
        seed,
        burn_in: None,
        record_per_period: true,
    }
}

#[test]
fn zero_table_reproduces_reactive_trace() {
    let s = fig8_scenario();
    let sol = solver::solve(BoundModel::TimeVarying, &s, &SolverOptions::default()).unwrap();
    let mut zero = proactive_core::policy::compile_tv(&sol, 14, 14, 2).unwrap();
    zero.mu.iter_mut().for_each(|v| *v = 0.0);
    let cfg = SimConfig {
        burn_in: Some(0),
        ..config(2_000, 3, 5)
    };

    let mut a = Recorder::default();
    let mut b = Recorder::default();
    let ra = sim::run_observed(&s, &PolicyTable::reactive(2, 1.0), &cfg, &mut a).unwrap();
    let rb = sim::run_observed(&s, &zero, &cfg, &mut b).unwrap();
    assert_eq!(a.loads, b.loads);
    assert_eq!(ra.cost, rb.cost);
}

#[test]
fn identical_inputs_give_identical_results() {
    let s = fig6_scenario();
    let (_, policy) = proactive_policy(&s, 20, &SolverOptions::default()).unwrap();
    let a = sim::run(&s, &policy, &config(3_000, 4, 99)).unwrap();
    let b = sim::run(&s, &policy, &config(3_000, 4, 99)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.cost.mean.to_bits(), b.cost.mean.to_bits());
    let c = sim::run(&s, &policy, &config(3_000, 4, 100)).unwrap();
    assert_ne!(a.cost.mean, c.cost.mean);
}

#[test]
fn ledger_audit_is_clean() {
    let s = fig8_scenario();
    for window in [1, 13, 14, 30] {
        let (_, policy) = proactive_policy(&s, window, &SolverOptions::default()).unwrap();
        let r = sim::run(&s, &policy, &config(100_000, 1, 3)).unwrap();
        assert_eq!(r.audit.slots, 100_000);
        assert_eq!(r.audit.violations, 0, "T = {window}");
    }
}

#[test]
fn empirical_cost_stays_above_the_bound() {
    let s = fig6_scenario();
    let sol = solver::solve(BoundModel::TimeInvariant, &s, &SolverOptions::default()).unwrap();
    for window in [1, 5, 20, 60] {
        let policy = compile_ti(&sol, window, 2).unwrap();
        let r = sim::run(&s, &policy, &config(10_000, 20, 8)).unwrap();
        assert!(
            r.cost.mean >= sol.bound - 3.0 * r.cost.stderr,
            "T = {window}: {} < {}",
            r.cost.mean,
            sol.bound
        );
    }
    let s = fig8_scenario();
    for window in [7, 14, 28] {
        let (sol, policy) = proactive_policy(&s, window, &SolverOptions::default()).unwrap();
        let r = sim::run(&s, &policy, &config(10_000, 20, 8)).unwrap();
        assert!(r.cost.mean >= sol.bound - 3.0 * r.cost.stderr, "T = {window}");
    }
}

#[test]
fn reactive_simulation_matches_enumeration() {
    for (pi, psi) in [(1.0, 1.0), (0.5, 0.5), (0.3, 0.8)] {
        let s = single_user(pi, [1.0, 2.0], psi);
        let analytic = sim::reactive_cost(&s).unwrap();
        let r = sim::run(&s, &PolicyTable::reactive(1, 1.0), &config(20_000, 20, 4)).unwrap();
        assert_eq!(r.policy, PolicyKind::Reactive);
        if r.cost.stderr == 0.0 {
            assert_eq!(r.cost.mean, analytic);
        } else {
            assert!((r.cost.mean - analytic).abs() <= 3.0 * r.cost.stderr, "{pi} {psi}");
        }
    }
}

#[test]
fn per_period_profile_has_one_entry_per_slot() {
    let s = fig8_scenario();
    let r = sim::run(&s, &PolicyTable::reactive(2, 1.0), &config(1_400, 2, 1)).unwrap();
    let p = r.per_period_profile().unwrap();
    assert_eq!(p.cost.len(), 14);
    assert_eq!(p.load.len(), 14);
    let levels = sim::reactive_cost_per_period(&s).unwrap();
    assert_eq!(levels.len(), 14);
    // bad-state probability peaks at slot 4, where reactive cost is highest
    let argmax = levels
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert_eq!(argmax, 4);
}

#[test]
fn mismatched_policy_is_rejected() {
    let s = fig8_scenario();
    let sol = solver::solve(BoundModel::TimeInvariant, &fig6_scenario(), &SolverOptions::default()).unwrap();
    let policy = compile_ti(&sol, 5, 2).unwrap();
    // same shape but a TI table is fine on a cyclo-stationary scenario
    assert!(sim::run(&s, &policy, &config(100, 1, 1)).is_ok());
    let one = single_user(0.5, [1.0, 2.0], 0.5);
    assert!(sim::run(&one, &policy, &config(100, 1, 1)).is_err());
}
