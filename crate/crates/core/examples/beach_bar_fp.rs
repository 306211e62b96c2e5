//! Model-based Fictitious Play on the beach bar, with a log-log rate fit.

use mfg_fp::environments::{build_beach_bar, BeachBarParams};
use mfg_fp::fictitious_play::{run_fp, FpConfig};
use mfg_fp::metrics::rate_fit;

fn main() -> mfg_fp::Result<()> {
    let model = build_beach_bar(&BeachBarParams::default())?;
    let result = run_fp(&model, &FpConfig::model_based(200))?;
    for (j, phi) in result.phi_trace() {
        if [0, 1, 10, 50, 100, 200].contains(&j) {
            println!("{j:>4}  {phi:.6}");
        }
    }
    let fit = rate_fit(&result.phi_trace())?;
    println!("slope {:.3} (r² {:.3})", fit.slope, fit.r2);
    Ok(())
}
