//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::time::Instant;

use mfg_fp::best_response::{backward_induction, QLearningConfig};
use mfg_fp::distribution::propagate_exact;
use mfg_fp::environments::beach_bar::CLOSED;
use mfg_fp::environments::{
    build_beach_bar, build_lq, build_maze, lq_exact_policy, lq_riccati_eta, BeachBarParams,
    LqParams, MazeParams,
};
use mfg_fp::fictitious_play::{run_fp, FpConfig, FpRunner};
use mfg_fp::metrics::{exploitability, monotonicity_check, rate_fit, value_gap_bound};
use mfg_fp::model::{FiniteMFG, NoiseNodeSpec, NoiseTree, PolicyFlow, UNIT_SYMBOL};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn phi(r: &mfg_fp::fictitious_play::FpResult, j: usize) -> Result<f64, String> {
    r.phi_at(j).ok_or_else(|| format!("no exploitability logged at iteration {j}"))
}

fn fp_rate() -> Outcome {
    let model = build_beach_bar(&BeachBarParams::default()).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let r = run_fp(&model, &FpConfig::model_based(200)).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let fit = rate_fit(&r.phi_trace()).map_err(|e| e.to_string())?;
    check(
        fit.slope <= -0.8 && secs < 120.0,
        format!("slope {:.3} over {} points, r² {:.3}, {secs:.1}s", fit.slope, fit.points, fit.r2),
    )
}

fn model_free_ordering() -> Outcome {
    let model = build_beach_bar(&BeachBarParams::default()).map_err(|e| e.to_string())?;
    let mb = run_fp(&model, &FpConfig::model_based(100)).map_err(|e| e.to_string())?;
    let mut cfg = FpConfig::model_free(100, QLearningConfig::default(), 10 * model.num_states());
    cfg.eval_every = 5;
    let mf = run_fp(&model, &cfg).map_err(|e| e.to_string())?;
    let (mb5, mb100) = (phi(&mb, 5)?, phi(&mb, 100)?);
    let (mf5, mf100) = (phi(&mf, 5)?, phi(&mf, 100)?);
    check(
        mf100 > mb100 && mb100 < 0.25 * mb5 && mf100 < 0.25 * mf5,
        format!("model-based {mb5:.4} → {mb100:.4}, model-free {mf5:.4} → {mf100:.4}"),
    )
}

fn common_noise() -> Outcome {
    let params = BeachBarParams::one_closure();
    let model = build_beach_bar(&params).map_err(|e| e.to_string())?;
    let r = run_fp(&model, &FpConfig::model_based(100)).map_err(|e| e.to_string())?;
    let (p5, p100) = (phi(&r, 5)?, phi(&r, 100)?);
    let tree = model.tree();
    let closed: Vec<usize> = tree
        .level(params.horizon)
        .filter(|&n| tree.path(n).contains(&CLOSED))
        .collect();
    if closed.is_empty() {
        return Err("no closed scenario at the last step".into());
    }
    let u = 1.0 / model.num_states() as f64;
    let tv = closed
        .iter()
        .map(|&n| r.mu_bar.slice(n).iter().map(|p| (p - u).abs()).sum::<f64>() / 2.0)
        .fold(0.0, f64::max);
    check(
        p100 < 0.2 * p5 && tv < 0.1,
        format!("φ {p5:.4} → {p100:.4} (ratio {:.4}), closed-scenario TV {tv:.4}", p100 / p5),
    )
}

fn lq_benchmark() -> Outcome {
    let params = LqParams::default();
    let ode = common::riccati_rk4(
        params.drift,
        params.q,
        params.kappa,
        params.c_term,
        params.dt,
        params.horizon,
        1000,
    );
    let mut err = 0.0f64;
    for (n, eta) in ode.iter().enumerate() {
        let closed = lq_riccati_eta(n as f64 * params.dt, &params).map_err(|e| e.to_string())?;
        err = err.max((closed - eta).abs());
    }
    let model = build_lq(&params).map_err(|e| e.to_string())?;
    let exact = lq_exact_policy(&model, &params).map_err(|e| e.to_string())?;
    let floor = exploitability(&model, &exact).map_err(|e| e.to_string())?.phi;
    let uniform = exploitability(&model, &PolicyFlow::uniform(&model))
        .map_err(|e| e.to_string())?
        .phi;
    let mut cfg = FpConfig::model_based(200);
    cfg.eval_every = 10;
    let r = run_fp(&model, &cfg).map_err(|e| e.to_string())?;
    let fp = phi(&r, 200)?;
    check(
        err < 1e-6 && floor * 10.0 <= uniform && fp <= 2.0 * floor,
        format!(
            "Riccati max err {err:.2e}; φ exact {floor:.4}, uniform {uniform:.4}, FP@200 {fp:.4}"
        ),
    )
}

fn discounted() -> Outcome {
    let model = build_beach_bar(&BeachBarParams::discounted()).map_err(|e| e.to_string())?;
    let gamma = model.gamma().ok_or("model is not discounted")?;
    let target = 1.0 / (1.0 - gamma);
    let mut runner =
        FpRunner::new(&model, FpConfig::model_based(100)).map_err(|e| e.to_string())?;
    let mut mass_err = 0.0f64;
    while !runner.is_done() {
        runner.step().map_err(|e| e.to_string())?;
        let s = runner.state();
        for f in [&s.mu_bar, &s.last_flow] {
            mass_err = mass_err.max((f.total(0) - target).abs());
        }
    }
    let r = runner.finish();
    let (p5, p100) = (phi(&r, 5)?, phi(&r, 100)?);
    check(
        p5 >= 4.0 * p100 && mass_err <= 1e-8,
        format!("φ_γ {p5:.4} → {p100:.4} (×{:.1}), mass error {mass_err:.1e}", p5 / p100),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut worst_j = 0.0f64;
    let mut worst_phi = 0.0f64;
    for seed in 0..50 {
        let model = common::random_instance(seed, 14);
        let pi = common::random_policy(&model, 1000 + seed);
        let mu = common::flow(&model, &pi);
        let flow = common::as_flow(mu.clone());
        let (q, _) = backward_induction(&model, &flow).map_err(|e| e.to_string())?;
        let v0 = q.greedy_values();
        let j_bi: f64 = model.mu0().iter().zip(v0.slice(0)).map(|(m, v)| m * v).sum();
        let j_bf = common::brute_force_best(&model, &mu);
        worst_j = worst_j.max((j_bi - j_bf).abs());
        let phi_lib = exploitability(&model, &pi).map_err(|e| e.to_string())?.phi;
        let phi_bf = common::brute_force_exploitability(&model, &pi);
        worst_phi = worst_phi.max((phi_lib - phi_bf).abs());
    }
    check(
        worst_j <= 1e-10 && worst_phi <= 1e-10,
        format!("50 instances: max |ΔJ| {worst_j:.1e}, max |Δφ| {worst_phi:.1e}"),
    )
}

/// Plain arrays, no tree: backward induction and forward propagation for a
/// game without common noise.
fn plain_solution(model: &FiniteMFG, mu: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (ns, na) = (model.num_states(), model.num_actions());
    let horizon = model.horizon().unwrap();
    let k = model.kernel(UNIT_SYMBOL, model.mu0());
    let mut q_all = vec![0.0; (horizon + 1) * ns * na];
    let mut v_next = vec![0.0; ns];
    let mut actions = vec![vec![0; ns]; horizon + 1];
    for n in (0..=horizon).rev() {
        let r = model.reward_table(UNIT_SYMBOL, &mu[n]);
        let mut v = vec![0.0; ns];
        for x in 0..ns {
            let mut best = 0;
            for a in 0..na {
                let mut term = r[x * na + a];
                if n < horizon {
                    let (t, p) = k.row(x, a);
                    let mut cont = 0.0;
                    for (&y, &p) in t.iter().zip(p) {
                        cont += p * v_next[y as usize];
                    }
                    term += cont;
                }
                q_all[(n * ns + x) * na + a] = term;
                if term > q_all[(n * ns + x) * na + best] {
                    best = a;
                }
            }
            actions[n][x] = best;
            v[x] = q_all[(n * ns + x) * na + best];
        }
        v_next = v;
    }
    let mut flow = vec![model.mu0().to_vec()];
    for n in 0..horizon {
        let mut next = vec![0.0; ns];
        for x in 0..ns {
            let w = flow[n][x];
            if w == 0.0 {
                continue;
            }
            let (t, p) = k.row(x, actions[n][x]);
            for (&y, &p) in t.iter().zip(p) {
                next[y as usize] += w * p;
            }
        }
        flow.push(next);
    }
    (q_all, flow)
}

fn chain_spec(depth: usize) -> NoiseNodeSpec {
    let mut node = NoiseNodeSpec {
        symbol: UNIT_SYMBOL,
        prob: 1.0,
        children: Vec::new(),
    };
    for _ in 0..depth {
        node = NoiseNodeSpec {
            symbol: UNIT_SYMBOL,
            prob: 1.0,
            children: vec![node],
        };
    }
    node
}

fn invariants() -> Outcome {
    let mut notes = Vec::new();
    let mut failures = Vec::new();

    // Mass, averaging consistency and the value-gap bound along FP runs.
    let mut mass = 0.0f64;
    let mut avg = 0.0f64;
    let mut bound_violations = 0usize;
    let mut logged = 0usize;
    for params in [
        BeachBarParams::default(),
        BeachBarParams::one_closure(),
        BeachBarParams::closure_window(),
    ] {
        let model = build_beach_bar(&params).map_err(|e| e.to_string())?;
        let mut runner =
            FpRunner::new(&model, FpConfig::model_based(30)).map_err(|e| e.to_string())?;
        while !runner.is_done() {
            runner.step().map_err(|e| e.to_string())?;
            let s = runner.state();
            mass = mass.max(s.mu_bar.max_mass_error()).max(s.last_flow.max_mass_error());
            let induced = propagate_exact(&model, &s.pi_bar).map_err(|e| e.to_string())?;
            avg = avg.max(induced.max_abs_diff(&s.mu_bar));
            let gap = value_gap_bound(&model, &s.pi_bar).map_err(|e| e.to_string())?;
            logged += 1;
            if gap.phi > gap.bound + 1e-12 {
                bound_violations += 1;
            }
        }
    }
    notes.push(format!("mass err {mass:.1e}, μ̄ vs μ^π̄ {avg:.1e}, bound held on {logged} iterates"));
    if mass > 1e-12 {
        failures.push("mass conservation");
    }
    if avg > 1e-10 {
        failures.push("averaging consistency");
    }
    if bound_violations > 0 {
        failures.push("value-gap bound");
    }

    // Monotone crowd terms.
    let beach = build_beach_bar(&BeachBarParams::default()).map_err(|e| e.to_string())?;
    let maze = build_maze(&MazeParams::default()).map_err(|e| e.to_string())?;
    let mb = monotonicity_check(&beach, 1000, 1).map_err(|e| e.to_string())?;
    let mm = monotonicity_check(&maze.model, 200, 2).map_err(|e| e.to_string())?;
    notes.push(format!("monotonicity max {:.1e} / {:.1e}", mb.max_value, mm.max_value));
    if mb.max_value > 1e-12 || mm.max_value > 1e-12 {
        failures.push("monotonicity");
    }

    // A single-path tree reproduces the plain recursion bit for bit.
    let params = BeachBarParams::default();
    let implicit = build_beach_bar(&params).map_err(|e| e.to_string())?;
    let explicit = build_beach_bar(&params)
        .map_err(|e| e.to_string())?
        .with_tree(NoiseTree::from_spec(&chain_spec(params.horizon + 1)));
    let pi = common::random_policy(&implicit, 5);
    let mu = propagate_exact(&implicit, &pi).map_err(|e| e.to_string())?;
    let mu_rows: Vec<Vec<f64>> = (0..=params.horizon).map(|n| mu.slice(n).to_vec()).collect();
    let (q_plain, flow_plain) = plain_solution(&implicit, &mu_rows);
    let (q_tree, br_tree) = backward_induction(&implicit, &mu).map_err(|e| e.to_string())?;
    let flow_tree = propagate_exact(&implicit, &br_tree).map_err(|e| e.to_string())?;
    let mut bit_exact = q_tree.as_slice() == q_plain.as_slice();
    bit_exact &= (0..=params.horizon).all(|n| flow_tree.slice(n) == flow_plain[n].as_slice());
    let cfg = FpConfig::model_based(20);
    let a = run_fp(&implicit, &cfg).map_err(|e| e.to_string())?;
    let b = run_fp(&explicit, &cfg).map_err(|e| e.to_string())?;
    bit_exact &= a.mu_bar.as_slice() == b.mu_bar.as_slice()
        && a.pi_bar.as_slice() == b.pi_bar.as_slice()
        && a.phi_trace() == b.phi_trace();
    notes.push(format!("degenerate tree bit-exact: {bit_exact}"));
    if !bit_exact {
        failures.push("degenerate-tree unification");
    }

    let detail = notes.join("; ");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; failed: {}", failures.join(", ")))
    }
}

fn maze_properties() -> Outcome {
    let start = Instant::now();
    let maze = build_maze(&MazeParams::default()).map_err(|e| e.to_string())?;
    let r = run_fp(&maze.model, &FpConfig::model_based(50)).map_err(|e| e.to_string())?;
    let trace: Vec<(usize, f64)> = r.phi_trace().into_iter().filter(|t| t.0 >= 1).collect();
    let mut running = f64::INFINITY;
    let mut worst = 0.0f64;
    for &(_, p) in &trace {
        if running.is_finite() {
            worst = worst.max(p / running - 1.0);
        }
        running = running.min(p);
    }
    let first = trace.first().map_or(f64::NAN, |t| t.1);
    let last = trace.last().map_or(f64::NAN, |t| t.1);
    let horizon = maze.params.horizon;
    let node = maze.model.tree().level(horizon).start;
    let mu = r.mu_bar.slice(node);
    let near: f64 = (0..mu.len())
        .filter(|&i| maze.l1_to_goal(i) <= 20)
        .map(|i| mu[i])
        .sum();
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 0.05 && last < first && near >= 0.5 && secs < 900.0,
        format!(
            "φ {first:.2} → {last:.2}, worst rise {:.2}%, mass near goal {near:.3}, {secs:.0}s",
            100.0 * worst
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("fp rate on beach bar", fp_rate),
        ("model-free slower than model-based", model_free_ordering),
        ("common-noise convergence", common_noise),
        ("LQ benchmark", lq_benchmark),
        ("discounted game", discounted),
        ("oracle equivalence", oracle_equivalence),
        ("invariant suites", invariants),
        ("maze properties", maze_properties),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS [{}] {name}: {d} ({secs:.1}s)", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL [{}] {name}: {d} ({secs:.1}s)", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
