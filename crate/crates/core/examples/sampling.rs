//! Seeded trajectories and empirical densities against the exact flow.

use mfg_fp::distribution::{estimate_empirical, propagate_exact, sample_trajectory};
use mfg_fp::environments::{build_beach_bar, BeachBarParams};
use mfg_fp::model::PolicyFlow;
use mfg_fp::rng::stream;

fn main() -> mfg_fp::Result<()> {
    let params = BeachBarParams {
        num_states: 20,
        ..BeachBarParams::closure_window()
    };
    let model = build_beach_bar(&params)?;
    let pi = PolicyFlow::uniform(&model);
    let exact = propagate_exact(&model, &pi)?;
    let mut rng = stream(0, "example", 0);
    let t = sample_trajectory(&model, &pi, &exact, &mut rng)?;
    println!("states {:?}", t.states);
    println!("return {:.4}, scenario path {:?}", t.rewards.iter().sum::<f64>(), model.tree().path(t.leaf));
    for k in [100, 1000, 10_000] {
        let est = estimate_empirical(&model, &pi, k, 1)?;
        let missing = est.unestimated_slots().len();
        println!("{k:>6} players: TV at the root's child {:.4}, {missing} unvisited slots", exact.tv_distance(&est, 1));
    }
    Ok(())
}
