//! Linear-quadratic game: closed-form Riccati gain, its grid projection and
//! Fictitious Play.

use mfg_fp::environments::lq::riccati_ode;
use mfg_fp::environments::{build_lq, lq_exact_policy, lq_riccati_eta, LqParams};
use mfg_fp::fictitious_play::{run_fp, FpConfig};
use mfg_fp::metrics::exploitability;
use mfg_fp::model::PolicyFlow;

fn main() -> mfg_fp::Result<()> {
    let params = LqParams::default();
    let ode = riccati_ode(&params, 1000)?;
    let mut err = 0.0f64;
    for &(t, eta) in &ode {
        err = err.max((lq_riccati_eta(t, &params)? - eta).abs());
    }
    println!("η(0) = {:.6}, max |closed form - RK4| = {err:.2e}", ode[0].1);

    let model = build_lq(&params)?;
    let projected = lq_exact_policy(&model, &params)?;
    println!("φ(projected exact) = {:.4}", exploitability(&model, &projected)?.phi);
    println!("φ(uniform)         = {:.4}", exploitability(&model, &PolicyFlow::uniform(&model))?.phi);

    let mut cfg = FpConfig::model_based(20);
    cfg.eval_every = 5;
    for (j, phi) in run_fp(&model, &cfg)?.phi_trace() {
        println!("FP {j:>3}: {phi:.4}");
    }
    Ok(())
}
