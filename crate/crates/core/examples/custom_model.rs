//! A two-state game read from a JSON description, with a two-scenario noise
//! tree, validated and solved.

use mfg_fp::fictitious_play::{run_fp, FpConfig};
use mfg_fp::model::{model_from_str, validate_mfg};

const MODEL: &str = r#"{
    "name": "two_rooms",
    "states": ["left", "right"],
    "actions": ["stay", "switch"],
    "horizon": 2,
    "mu0": [0.9, 0.1],
    "noise_tree": {"children": [
        {"symbol": 0, "prob": 0.7, "children": [{"children": [{}]}]},
        {"symbol": 1, "prob": 0.3, "children": [{"children": [{}]}]}
    ]},
    "transition": [[[1.0, 0.0], [0.1, 0.9]], [[0.0, 1.0], [0.9, 0.1]]],
    "reward": {"builtin": "tabular",
               "params": {"values": [[[1.0, 0.8], [0.0, -0.2]], [[0.0, -0.2], [1.0, 0.8]]],
                          "crowd": {"kind": "neg_log", "weight": 0.5}}}
}"#;

fn main() -> mfg_fp::Result<()> {
    let model = model_from_str(MODEL)?;
    let report = validate_mfg(&model);
    if !report.is_valid() {
        eprintln!("{report}");
        std::process::exit(1);
    }
    println!("{} slots, {} scenarios", model.num_slots(), model.tree().level(model.tree().depth()).len());
    let result = run_fp(&model, &FpConfig::model_based(50))?;
    println!("φ after 50 iterations: {:.6}", result.phi_at(50).unwrap_or(f64::NAN));
    for slot in 0..model.num_slots() {
        println!("slot {slot}: μ̄ = {:?}", result.mu_bar.slice(slot));
    }
    Ok(())
}
