//! Exploitability, the value-gap bound, the monotonicity check and the
//! fixed-point residual for a half-converged policy.

use mfg_fp::best_response::evaluate_policy_q;
use mfg_fp::environments::{build_beach_bar, BeachBarParams};
use mfg_fp::fictitious_play::{run_fp, FpConfig};
use mfg_fp::metrics::{
    exploitability, fixed_point_residual, monotonicity_check, value_gap_bound,
};

fn main() -> mfg_fp::Result<()> {
    let model = build_beach_bar(&BeachBarParams::default())?;
    let r = run_fp(&model, &FpConfig::model_based(20))?;
    let report = exploitability(&model, &r.pi_bar)?;
    println!("φ = {:.5} (J* {:.4}, J {:.4})", report.phi, report.j_best, report.j_policy);
    let gap = value_gap_bound(&model, &r.pi_bar)?;
    println!("sup |V* - V^π| at step 0 = {:.5}", gap.bound);
    let mono = monotonicity_check(&model, 500, 7)?;
    println!("monotonicity: max {:.4} over {} pairs, holds {}", mono.max_value, mono.trials, mono.holds());
    let v = evaluate_policy_q(&model, &r.pi_bar, &r.mu_bar)?.values_under(&r.pi_bar);
    let res = fixed_point_residual(&model, &v, &r.mu_bar)?;
    println!("residual sup {:.5} at {:?}, μ-weighted {:.5}", res.sup_norm, res.argmax, res.weighted_norm);
    Ok(())
}
