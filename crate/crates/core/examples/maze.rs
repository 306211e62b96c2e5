//! Crowd heading to the centre of the default 100×100 maze.

use mfg_fp::environments::{build_maze, MazeParams};
use mfg_fp::fictitious_play::{run_fp, FpConfig};

fn main() -> mfg_fp::Result<()> {
    let maze = build_maze(&MazeParams::default())?;
    println!("{} free cells, horizon {}", maze.cells.len(), maze.params.horizon);
    let mut cfg = FpConfig::model_based(20);
    cfg.eval_every = 5;
    let result = run_fp(&maze.model, &cfg)?;
    for (j, phi) in result.phi_trace() {
        println!("{j:>3}  {phi:.3}");
    }
    for n in [0, 25, 50, 100] {
        let mu = result.mu_bar.slice(n);
        let near: f64 = (0..mu.len()).filter(|&i| maze.l1_to_goal(i) <= 20).map(|i| mu[i]).sum();
        println!("step {n:>3}: mass within 20 of the goal {near:.3}");
    }
    Ok(())
}
