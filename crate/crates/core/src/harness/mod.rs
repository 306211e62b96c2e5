//! Command implementations behind the `mfg-fp` binary.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

pub use config::{BackendName, ModeName, RunConfig};

use crate::best_response::evaluate_policy_q;
use crate::environments::{build_lq, lq, lq_exact_policy, EnvName, LqParams};
use crate::error::{Error, Result};
use crate::fictitious_play::{BrBackend, FpConfig, FpResult, FpRunner};
use crate::metrics::{exploitability, fixed_point_residual, monotonicity_check, rate_fit};
use crate::model::FiniteMFG;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Runs `f` on a pool of `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    let threads = threads.or_else(|| {
        std::env::var("MFG_FP_THREADS")
            .ok()
            .and_then(|v| v.trim().parse().ok())
    });
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.filter(|&n| n > 0) {
        builder = builder.num_threads(n);
    }
    match builder.build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

fn trace_csv(result: &FpResult, wallclock: bool) -> String {
    let mut s = String::from("iteration,exploitability,wallclock_s\n");
    for t in &result.trace {
        if wallclock {
            writeln!(s, "{},{},{}", t.iteration, t.phi, t.wallclock_s).unwrap();
        } else {
            writeln!(s, "{},{},", t.iteration, t.phi).unwrap();
        }
    }
    s
}

fn proxy_csv(result: &FpResult) -> Option<String> {
    if !result.config.log_proxy {
        return None;
    }
    let mut s = String::from("iteration,exploitability,proxy\n");
    for t in &result.trace {
        let p = t.proxy.map(|p| p.to_string()).unwrap_or_default();
        writeln!(s, "{},{},{p}", t.iteration, t.phi).unwrap();
    }
    Some(s)
}

fn flow_csv(model: &FiniteMFG, flow: &crate::model::DistributionFlow) -> Vec<u8> {
    let mut buf = Vec::new();
    flow.write_csv(model, &mut buf).expect("writing to memory");
    buf
}

/// Writes every output of a (possibly partial) run.
fn write_outputs(
    dir: &Path,
    cfg: &RunConfig,
    model: &FiniteMFG,
    result: &FpResult,
    failure: Option<&str>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join("exploitability.csv"), trace_csv(result, cfg.wallclock).as_bytes())?;
    if let Some(p) = proxy_csv(result) {
        write_atomic(&dir.join("exploitability_proxy.csv"), p.as_bytes())?;
    }
    write_atomic(&dir.join("distribution_final.csv"), &flow_csv(model, &result.mu_bar))?;
    for (j, flow) in &result.snapshots {
        let path = dir.join("distribution_snapshots").join(format!("iter_{j:06}.csv"));
        write_atomic(&path, &flow_csv(model, flow))?;
    }
    if failure.is_none() {
        write_reports(dir, model, result)?;
    }
    let fit = rate_fit(&result.phi_trace()).ok();
    let mut meta = json!({
        "library": "mfg-fp",
        "version": VERSION,
        "config": cfg,
        "seed": cfg.seed,
        "model": {
            "name": model.name(),
            "states": model.num_states(),
            "actions": model.num_actions(),
            "slots": model.num_slots(),
            "notes": model.notes(),
        },
        "br_backend": result.br_backend,
        "density_backend": result.density_backend,
        "warm_start": match result.config.br {
            BrBackend::QLearning { warm_start, .. } => Some(warm_start),
            BrBackend::Exact => None,
        },
        "iterations_completed": result.iteration_seconds.len(),
        "final_exploitability": result.trace.last().map(|t| t.phi),
        "rate_fit": fit,
        "status": failure.map_or("ok".to_string(), |f| format!("failed: {f}")),
    });
    if cfg.wallclock {
        meta["iteration_seconds"] = json!(result.iteration_seconds);
    }
    let text = serde_json::to_string_pretty(&meta)? + "\n";
    write_atomic(&dir.join("run_meta.json"), text.as_bytes())?;
    Ok(())
}

/// Monotonicity and fixed-point residual reports, where they apply.
fn write_reports(dir: &Path, model: &FiniteMFG, result: &FpResult) -> Result<()> {
    if model.reward().decomposition().is_some() {
        let report = monotonicity_check(model, 1000, 0)?;
        let text = serde_json::to_string_pretty(&json!({
            "trials": report.trials,
            "max": report.max_value,
            "holds": report.holds(),
            "witness": report.witness,
        }))? + "\n";
        write_atomic(&dir.join("monotonicity.json"), text.as_bytes())?;
    }
    if !model.is_discounted() && model.tree().is_degenerate() {
        let v = evaluate_policy_q(model, &result.pi_bar, &result.mu_bar)?.values_under(&result.pi_bar);
        let report = fixed_point_residual(model, &v, &result.mu_bar)?;
        let text = serde_json::to_string_pretty(&json!({
            "sup_norm": report.sup_norm,
            "weighted_norm": report.weighted_norm,
            "argmax": {"n": report.argmax.0, "state": report.argmax.1},
        }))? + "\n";
        write_atomic(&dir.join("residual.json"), text.as_bytes())?;
    }
    Ok(())
}

/// `run --config <path>`: exit 0 on success, 2 on a config error, 3 when
/// the run fails (outputs written so far are kept).
pub fn cmd_run(config_path: &Path, threads: Option<usize>) -> i32 {
    let cfg = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let dir = cfg.output_dir_for(config_path);
    with_threads(threads, || run_config(&cfg, &dir))
}

/// Executes a checked config into `dir`, returning an exit code.
pub fn run_config(cfg: &RunConfig, dir: &Path) -> i32 {
    let model = match cfg.build_model() {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let fp = cfg.fp_config(&model);
    let mut runner = match FpRunner::new(&model, fp) {
        Ok(r) => r,
        Err(e @ (Error::InvalidParameter(_) | Error::ModeMismatch(_))) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let mut failure = None;
    while !runner.is_done() {
        if let Err(e) = runner.step() {
            failure = Some(e.to_string());
            break;
        }
    }
    let result = runner.finish();
    if let Err(e) = write_outputs(dir, cfg, &model, &result, failure.as_deref()) {
        eprintln!("error: writing outputs to {}: {e}", dir.display());
        return EXIT_RUNTIME;
    }
    match failure {
        Some(f) => {
            eprintln!("error: run failed: {f} (partial outputs in {})", dir.display());
            EXIT_RUNTIME
        }
        None => {
            if let Some(t) = result.trace.last() {
                println!(
                    "{}: {} iterations, exploitability {:.6e}, outputs in {}",
                    model.name(),
                    t.iteration,
                    t.phi,
                    dir.display()
                );
            }
            EXIT_OK
        }
    }
}

/// Registry listing as text or JSON.
pub fn list_envs(json_format: bool) -> String {
    if json_format {
        let list: Vec<Value> = EnvName::ALL
            .iter()
            .map(|e| {
                json!({
                    "name": e.as_str(),
                    "description": e.description(),
                    "defaults": e.defaults(),
                })
            })
            .collect();
        serde_json::to_string_pretty(&list).expect("json") + "\n"
    } else {
        let mut s = String::new();
        for e in EnvName::ALL {
            writeln!(s, "{:<16} {}", e.as_str(), e.description()).unwrap();
            writeln!(s, "{:<16} defaults: {}", "", e.defaults()).unwrap();
        }
        s
    }
}

pub fn cmd_list_envs(json_format: bool) -> i32 {
    print!("{}", list_envs(json_format));
    EXIT_OK
}

#[derive(Clone, Debug)]
pub struct BenchLqOptions {
    pub iterations: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub params: LqParams,
}

impl Default for BenchLqOptions {
    fn default() -> Self {
        Self {
            iterations: 200,
            seed: 0,
            output_dir: PathBuf::from("out/bench_lq"),
            params: LqParams::default(),
        }
    }
}

/// Output of [`bench_lq`].
#[derive(Clone, Debug)]
pub struct BenchLq {
    pub phi_exact_projected: f64,
    pub phi_uniform: f64,
    pub trace: Vec<(usize, f64)>,
    /// `(t, closed form, ODE, |difference|)`.
    pub riccati: Vec<(f64, f64, f64, f64)>,
}

pub fn bench_lq(opts: &BenchLqOptions) -> Result<BenchLq> {
    let params = &opts.params;
    let model = build_lq(params)?;
    let exact = lq_exact_policy(&model, params)?;
    let phi_exact_projected = exploitability(&model, &exact)?.phi;
    let phi_uniform = exploitability(&model, &crate::model::PolicyFlow::uniform(&model))?.phi;
    let fp = FpConfig {
        seed: opts.seed,
        ..FpConfig::model_based(opts.iterations)
    };
    let result = FpRunner::new(&model, fp)?.run()?;
    let ode = lq::riccati_ode(params, 1000)?;
    let riccati = ode
        .into_iter()
        .map(|(t, eta_ode)| {
            let closed = lq::lq_riccati_eta(t, params)?;
            Ok((t, closed, eta_ode, (closed - eta_ode).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchLq {
        phi_exact_projected,
        phi_uniform,
        trace: result.phi_trace(),
        riccati,
    })
}

pub fn write_bench_lq(opts: &BenchLqOptions, bench: &BenchLq) -> Result<()> {
    let dir = &opts.output_dir;
    let mut cmp = String::from("iteration,phi_fp,phi_exact_projected\n");
    for (j, phi) in &bench.trace {
        writeln!(cmp, "{j},{phi},{}", bench.phi_exact_projected).unwrap();
    }
    write_atomic(&dir.join("comparison.csv"), cmp.as_bytes())?;
    let mut ric = String::from("t,eta_closed_form,eta_ode,abs_error\n");
    for (t, c, o, e) in &bench.riccati {
        writeln!(ric, "{t},{c},{o},{e}").unwrap();
    }
    write_atomic(&dir.join("riccati.csv"), ric.as_bytes())?;
    let max_err = bench.riccati.iter().map(|r| r.3).fold(0.0, f64::max);
    let meta = json!({
        "library": "mfg-fp",
        "version": VERSION,
        "seed": opts.seed,
        "iterations": opts.iterations,
        "params": opts.params,
        "phi_exact_projected": bench.phi_exact_projected,
        "phi_uniform": bench.phi_uniform,
        "riccati_max_abs_error": max_err,
    });
    let text = serde_json::to_string_pretty(&meta)? + "\n";
    write_atomic(&dir.join("run_meta.json"), text.as_bytes())?;
    Ok(())
}

pub fn cmd_bench_lq(opts: &BenchLqOptions, threads: Option<usize>) -> i32 {
    with_threads(threads, || match bench_lq(opts) {
        Ok(b) => match write_bench_lq(opts, &b) {
            Ok(()) => {
                let last = b.trace.last().map_or(f64::NAN, |t| t.1);
                println!(
                    "lq: FP exploitability {last:.6e} after {} iterations; projected exact {:.6e}; uniform {:.6e}",
                    opts.iterations, b.phi_exact_projected, b.phi_uniform
                );
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_RUNTIME
            }
        },
        Err(e @ Error::InvalidParameter(_)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    })
}
