//! A bar that closes with probability one half at mid-horizon. Prints the
//! per-scenario exploitability and how far each final distribution is from
//! uniform.

use mfg_fp::environments::beach_bar::CLOSED;
use mfg_fp::environments::{build_beach_bar, BeachBarParams};
use mfg_fp::fictitious_play::{run_fp, FpConfig};
use mfg_fp::metrics::exploitability;

fn main() -> mfg_fp::Result<()> {
    let params = BeachBarParams::one_closure();
    let model = build_beach_bar(&params)?;
    let result = run_fp(&model, &FpConfig::model_based(100))?;
    let report = exploitability(&model, &result.pi_bar)?;
    println!("φ = {:.5}", report.phi);
    for s in &report.scenarios {
        println!(
            "  scenario {:>3}  p={:.2}  J*={:.4}  J={:.4}",
            s.node_id, s.prob, s.j_best, s.j_policy
        );
    }
    let tree = model.tree();
    let u = 1.0 / model.num_states() as f64;
    for node in tree.level(params.horizon) {
        let state = if tree.path(node).contains(&CLOSED) { "closed" } else { "open" };
        let tv: f64 = result.mu_bar.slice(node).iter().map(|p| (p - u).abs()).sum::<f64>() / 2.0;
        println!("{state:>6}: TV from uniform {tv:.4}");
    }
    Ok(())
}
