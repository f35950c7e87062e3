//! Solve the two-user bound, compile the proactive policy for a few window
//! lengths and compare simulated cost with the reactive baseline.

use proactive_core::model::{ChannelModel, CostFunction, DemandModel, Scenario};
use proactive_core::policy::{compile_ti, PolicyTable};
use proactive_core::sim::{self, SimConfig};
use proactive_core::solver::{self, BoundModel, SolverOptions};

fn main() -> proactive_core::Result<()> {
    let scenario = Scenario::new(
        1.0,
        DemandModel::independent(vec![0.42, 0.42]),
        ChannelModel::symmetric(2, &[0.5, 2.0], &[vec![0.54, 0.46]]),
        CostFunction::polynomial(4.0),
    );
    let sol = solver::solve(BoundModel::TimeInvariant, &scenario, &SolverOptions::default())?;
    let cfg = SimConfig {
        horizon: 10_000,
        replications: 20,
        seed: 1,
        burn_in: None,
        record_per_period: false,
    };
    let reactive = sim::run(&scenario, &PolicyTable::reactive(2, 1.0), &cfg)?;
    println!("lower bound  {:.4}", sol.bound);
    println!("reactive     {:.4} ± {:.4}", reactive.cost.mean, reactive.cost.stderr);
    for window in [1, 10, 50] {
        let policy = compile_ti(&sol, window, 2)?;
        let r = sim::run(&scenario, &policy, &cfg)?;
        println!("T = {window:<3}     {:.4} ± {:.4}", r.cost.mean, r.cost.stderr);
    }
    Ok(())
}
