//! Infinite-horizon beach bar: occupancy measures and policy iteration.

use mfg_fp::distribution::occupancy_measure;
use mfg_fp::environments::{build_beach_bar, BeachBarParams};
use mfg_fp::fictitious_play::{run_fp, FpConfig};
use mfg_fp::model::PolicyFlow;

fn main() -> mfg_fp::Result<()> {
    let model = build_beach_bar(&BeachBarParams::discounted())?;
    let gamma = model.gamma().expect("discounted");
    let occ = occupancy_measure(&model, &PolicyFlow::uniform(&model))?;
    println!("Σ μ_γ = {:.10} (1/(1-γ) = {})", occ.total(0), 1.0 / (1.0 - gamma));
    let result = run_fp(&model, &FpConfig::model_based(100))?;
    for j in [1, 5, 20, 100] {
        println!("φ_γ at {j:>3}: {:.5}", result.phi_at(j).unwrap_or(f64::NAN));
    }
    let bar = model.num_states() / 2;
    let near: f64 = (bar - 5..=bar + 5).map(|x| result.mu_bar.slice(0)[x]).sum::<f64>() * (1.0 - gamma);
    println!("normalized occupancy within 5 of the bar: {near:.3}");
    Ok(())
}
