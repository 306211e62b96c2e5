//! Runs a JSON experiment config through the harness, as `mfg-fp run` does.

use std::path::PathBuf;

use mfg_fp::harness::{run_config, RunConfig};

fn main() {
    let text = r#"{
  "env": "beach_bar_cn2",
  "env_params": {"num_states": 30},
  "iterations": 20,
  "eval_every": 5,
  "seed": 4
}"#;
    let cfg = match RunConfig::parse(text, "inline") {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    let dir = std::env::temp_dir().join("mfg_fp_run_config_example");
    let code = run_config(&cfg, &dir);
    println!("exit {code}; files in {}", dir.display());
    let mut names: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map(|d| d.filter_map(|e| e.ok()).map(|e| e.path()).collect())
        .unwrap_or_default();
    names.sort();
    for n in names {
        println!("  {}", n.display());
    }
}
