//! Q-learning best responses and sampled densities, compared with the exact
//! backends on the same game.

use mfg_fp::best_response::QLearningConfig;
use mfg_fp::environments::{build_beach_bar, BeachBarParams};
use mfg_fp::fictitious_play::{run_fp, FpConfig};

fn main() -> mfg_fp::Result<()> {
    let model = build_beach_bar(&BeachBarParams {
        num_states: 40,
        horizon: 10,
        ..BeachBarParams::default()
    })?;
    let exact = run_fp(&model, &FpConfig::model_based(60))?;
    let mut cfg = FpConfig::model_free(60, QLearningConfig::default(), 400);
    cfg.eval_every = 10;
    cfg.log_proxy = true;
    cfg.seed = 1;
    let sampled = run_fp(&model, &cfg)?;
    println!("iter  model-based  model-free  learned-gap");
    for t in &sampled.trace {
        let mb = exact.phi_at(t.iteration).unwrap_or(f64::NAN);
        let proxy = t.proxy.map_or("-".to_string(), |p| format!("{p:.4}"));
        println!("{:>4}  {mb:>11.4}  {:>10.4}  {proxy}", t.iteration, t.phi);
    }
    Ok(())
}
