//! Returns, exploitability and convergence diagnostics.

use serde::{Deserialize, Serialize};

use crate::best_response::{
    argmax, backward_induction, evaluate_policy_discounted, evaluate_policy_q,
    policy_iteration_discounted,
};
use crate::distribution::{occupancy_measure, propagate_exact, push_forward};
use crate::error::{Error, Result};
use crate::model::{DistributionFlow, FiniteMFG, PolicyFlow, ValueTable};
use crate::rng;

/// Value of `φ` below which a negative result is treated as rounding.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

/// Expected return split over the scenarios (leaves) of the tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnBreakdown {
    pub total: f64,
    /// `(leaf dfs id, probability, conditional return)`.
    pub scenarios: Vec<(usize, f64, f64)>,
}

/// Exact return of `policy` for a player facing the crowd flow `mu`.
pub fn evaluate_return(model: &FiniteMFG, policy: &PolicyFlow, mu: &DistributionFlow) -> Result<f64> {
    Ok(evaluate_return_detailed(model, policy, mu)?.total)
}

/// [`evaluate_return`] with the per-scenario decomposition.
///
/// The player's own state marginal is pushed through the tree against the
/// kernels and rewards the crowd flow induces; no sampling is involved.
pub fn evaluate_return_detailed(
    model: &FiniteMFG,
    policy: &PolicyFlow,
    mu: &DistributionFlow,
) -> Result<ReturnBreakdown> {
    policy.matches(model)?;
    mu.matches(model)?;
    if let Some(gamma) = model.gamma() {
        if mu.kind() != (crate::model::FlowKind::Occupancy { gamma }) {
            return Err(Error::ModeMismatch("discounted returns need an occupancy flow".into()));
        }
        let v = evaluate_policy_discounted(model, policy, mu)?;
        let total = dot(model.mu0(), &v);
        return Ok(ReturnBreakdown {
            total,
            scenarios: vec![(0, 1.0, total)],
        });
    }
    let horizon = model.require_finite("return evaluation")?;
    let tree = model.tree();
    let (ns, na) = (model.num_states(), model.num_actions());
    let mut nu = vec![Vec::new(); model.num_slots()];
    nu[0] = model.mu0().to_vec();
    let mut acc = vec![0.0; tree.num_nodes()];
    for depth in 0..=horizon {
        for node in tree.level(depth) {
            let m = mu.slice(node);
            let pi = policy.slice(node);
            for &child in tree.children(node) {
                let cn = tree.node(child);
                let r = model.reward_table(cn.symbol, m);
                let mut gain = 0.0;
                for x in 0..ns {
                    let w = nu[node][x];
                    if w == 0.0 {
                        continue;
                    }
                    let mut e = 0.0;
                    for a in 0..na {
                        e += pi[x * na + a] * r[x * na + a];
                    }
                    gain += w * e;
                }
                acc[child] = acc[node] + gain;
                if depth < horizon {
                    let mut next = vec![0.0; ns];
                    push_forward(&model.kernel(cn.symbol, m), pi, &nu[node], &mut next);
                    nu[child] = next;
                }
            }
        }
    }
    let mut total = 0.0;
    let mut scenarios = Vec::new();
    for (i, leaf) in tree.level(horizon + 1).enumerate() {
        let p = tree.node(leaf).prob;
        if i == 0 {
            total = p * acc[leaf];
        } else {
            total += p * acc[leaf];
        }
        scenarios.push((tree.dfs_id(leaf), p, acc[leaf]));
    }
    Ok(ReturnBreakdown { total, scenarios })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exploitability of one scenario (leaf) of the tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGap {
    pub node_id: usize,
    pub prob: f64,
    pub j_best: f64,
    pub j_policy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExploitabilityReport {
    /// `j_best - j_policy`, with values in `[-1e-9, 0)` clamped to zero.
    pub phi: f64,
    pub phi_raw: f64,
    pub j_best: f64,
    pub j_policy: f64,
    pub backend: String,
    pub scenarios: Vec<ScenarioGap>,
}

fn clamp_phi(raw: f64) -> f64 {
    if (-NEGATIVE_TOLERANCE..0.0).contains(&raw) {
        0.0
    } else {
        raw
    }
}

/// Induced crowd flow of a policy: exact propagation, or the occupancy
/// measure in discounted mode.
pub fn induced_flow(model: &FiniteMFG, policy: &PolicyFlow) -> Result<DistributionFlow> {
    if model.is_discounted() {
        occupancy_measure(model, policy)
    } else {
        propagate_exact(model, policy)
    }
}

/// Exact best response to a fixed flow in either mode.
pub fn exact_best_response(model: &FiniteMFG, mu: &DistributionFlow) -> Result<PolicyFlow> {
    Ok(if model.is_discounted() {
        policy_iteration_discounted(model, mu)?.1
    } else {
        backward_induction(model, mu)?.1
    })
}

/// `φ(π) = max_π' J(μ0, π', μ^π) - J(μ0, π, μ^π)` with an exact best response.
pub fn exploitability(model: &FiniteMFG, policy: &PolicyFlow) -> Result<ExploitabilityReport> {
    let crowd = induced_flow(model, policy)?;
    let best = exact_best_response(model, &crowd)?;
    gap_report(model, policy, &best, &crowd, "exact")
}

/// Gap between `deviation` and `policy` against the crowd `policy` induces.
/// With a learned deviation this is a lower-bound proxy of `φ`.
pub fn deviation_gain(
    model: &FiniteMFG,
    policy: &PolicyFlow,
    deviation: &PolicyFlow,
) -> Result<ExploitabilityReport> {
    let crowd = induced_flow(model, policy)?;
    gap_report(model, policy, deviation, &crowd, "learned")
}

fn gap_report(
    model: &FiniteMFG,
    policy: &PolicyFlow,
    best: &PolicyFlow,
    crowd: &DistributionFlow,
    backend: &str,
) -> Result<ExploitabilityReport> {
    let jb = evaluate_return_detailed(model, best, crowd)?;
    let jp = evaluate_return_detailed(model, policy, crowd)?;
    let raw = jb.total - jp.total;
    let scenarios = jb
        .scenarios
        .iter()
        .zip(&jp.scenarios)
        .map(|(b, p)| ScenarioGap {
            node_id: b.0,
            prob: b.1,
            j_best: b.2,
            j_policy: p.2,
        })
        .collect();
    Ok(ExploitabilityReport {
        phi: clamp_phi(raw),
        phi_raw: raw,
        j_best: jb.total,
        j_policy: jp.total,
        backend: backend.into(),
        scenarios,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub trials: usize,
    /// Largest `Σ_x (μ - μ')(r̄(x, μ) - r̄(x, μ'))` observed.
    pub max_value: f64,
    /// A pair attaining `max_value` when it exceeds `1e-12`.
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

impl MonotonicityReport {
    pub fn holds(&self) -> bool {
        self.max_value <= 1e-12
    }
}

fn dirichlet_one(rng: &mut rng::StreamRng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -(1.0 - rng::uniform(rng)).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Samples `trials` pairs uniformly on the simplex and evaluates the
/// Lasry-Lions inequality on the crowd part of the reward.
pub fn monotonicity_check(model: &FiniteMFG, trials: usize, seed: u64) -> Result<MonotonicityReport> {
    let dec = model.reward().decomposition().ok_or_else(|| {
        Error::InvalidModel(format!("`{}` does not declare a monotone decomposition", model.name()))
    })?;
    let ns = model.num_states();
    let mut rng = rng::stream(seed, "monotonicity", 0);
    let (mut ra, mut rb) = (vec![0.0; ns], vec![0.0; ns]);
    let mut report = MonotonicityReport {
        trials,
        max_value: f64::NEG_INFINITY,
        witness: None,
    };
    for _ in 0..trials {
        let a = dirichlet_one(&mut rng, ns);
        let b = dirichlet_one(&mut rng, ns);
        dec.crowd(&a, &mut ra);
        dec.crowd(&b, &mut rb);
        let value: f64 = (0..ns).map(|x| (a[x] - b[x]) * (ra[x] - rb[x])).sum();
        if value > report.max_value {
            report.max_value = value;
            if value > 1e-12 {
                report.witness = Some((a, b));
            }
        }
    }
    if trials == 0 {
        report.max_value = 0.0;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `residual[n][x]`.
    pub residual: Vec<Vec<f64>>,
    pub sup_norm: f64,
    /// Mean over steps of `Σ_x μ_n(x) |residual_n(x)|`.
    pub weighted_norm: f64,
    /// `(n, x)` of the largest absolute residual.
    pub argmax: (usize, usize),
}

/// Residual of `v` in the optimal Bellman recursion against `mu`.
///
/// Defined for finite-horizon games without common noise.
pub fn fixed_point_residual(
    model: &FiniteMFG,
    v: &ValueTable,
    mu: &DistributionFlow,
) -> Result<ResidualReport> {
    let horizon = model.require_finite("fixed-point residual")?;
    if !model.tree().is_degenerate() {
        return Err(Error::ModeMismatch(
            "fixed-point residual is defined without common noise".into(),
        ));
    }
    mu.matches(model)?;
    let (ns, na) = (model.num_states(), model.num_actions());
    if v.num_slots() != model.num_slots() || v.num_states() != ns {
        return Err(Error::ShapeMismatch("value table does not match the model".into()));
    }
    let tree = model.tree();
    let mut report = ResidualReport {
        residual: Vec::with_capacity(horizon + 1),
        sup_norm: 0.0,
        weighted_norm: 0.0,
        argmax: (0, 0),
    };
    // slot n is the single node at depth n
    for n in 0..=horizon {
        let child = tree.children(n)[0];
        let symbol = tree.node(child).symbol;
        let m = mu.slice(n);
        let r = model.reward_table(symbol, m);
        let kernel = model.kernel(symbol, m);
        let mut row = vec![0.0; ns];
        let mut weighted = 0.0;
        for x in 0..ns {
            let q: Vec<f64> = (0..na)
                .map(|a| {
                    let mut t = r[x * na + a];
                    if n < horizon {
                        let (targets, probs) = kernel.row(x, a);
                        let mut cont = 0.0;
                        for (&y, &p) in targets.iter().zip(probs) {
                            cont += p * v.get(child, y as usize);
                        }
                        t += cont;
                    }
                    t
                })
                .collect();
            let res = v.get(n, x) - q[argmax(&q)];
            if res.abs() > report.sup_norm {
                report.sup_norm = res.abs();
                report.argmax = (n, x);
            }
            weighted += m[x] * res.abs();
            row[x] = res;
        }
        report.weighted_norm += weighted / (horizon + 1) as f64;
        report.residual.push(row);
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueGap {
    /// `sup_x |V*_0(x) - V^π_0(x)|` at the root, against `μ^π`.
    pub bound: f64,
    pub phi: f64,
}

/// Value-function gap at the initial step, which bounds the exploitability.
pub fn value_gap_bound(model: &FiniteMFG, policy: &PolicyFlow) -> Result<ValueGap> {
    let crowd = induced_flow(model, policy)?;
    let (v_best, v_pol) = if model.is_discounted() {
        let best = policy_iteration_discounted(model, &crowd)?.1;
        (
            evaluate_policy_discounted(model, &best, &crowd)?,
            evaluate_policy_discounted(model, policy, &crowd)?,
        )
    } else {
        let (q, _) = backward_induction(model, &crowd)?;
        let qp = evaluate_policy_q(model, policy, &crowd)?;
        (
            q.greedy_values().slice(0).to_vec(),
            qp.values_under(policy).slice(0).to_vec(),
        )
    };
    let bound = v_best
        .iter()
        .zip(&v_pol)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let phi = exploitability(model, policy)?.phi;
    Ok(ValueGap { bound, phi })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// First iteration included in [`rate_fit`].
pub const RATE_FIT_START: usize = 10;

/// Least-squares fit of `log φ` against `log j` over `j ≥ 10`, skipping
/// non-positive `φ`.
pub fn rate_fit(trace: &[(usize, f64)]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .filter(|&&(j, phi)| j >= RATE_FIT_START && phi > 0.0)
        .map(|&(j, phi)| ((j as f64).ln(), phi.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientTrace(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept,
        r2,
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{CrowdTerm, Dynamics, Kernel, Mode, TabularReward};

    fn one_state(horizon: usize) -> FiniteMFG {
        FiniteMFG::new(
            "one",
            1,
            1,
            Mode::Finite { horizon },
            vec![1.0],
            None,
            Dynamics::Fixed(vec![Kernel::identity(1, 1)]),
            Arc::new(TabularReward::new(vec![vec![1.0]], CrowdTerm::None)),
        )
    }

    #[test]
    fn constant_reward_single_step() {
        let m = one_state(0);
        let p = PolicyFlow::uniform(&m);
        let mu = propagate_exact(&m, &p).unwrap();
        assert_eq!(evaluate_return(&m, &p, &mu).unwrap(), 1.0);
        let m = one_state(4);
        let mu = propagate_exact(&m, &PolicyFlow::uniform(&m)).unwrap();
        assert_eq!(evaluate_return(&m, &PolicyFlow::uniform(&m), &mu).unwrap(), 5.0);
    }

    #[test]
    fn single_action_game_has_zero_exploitability() {
        let m = one_state(3);
        let r = exploitability(&m, &PolicyFlow::uniform(&m)).unwrap();
        assert_eq!(r.phi, 0.0);
        assert_eq!(r.phi_raw, 0.0);
    }

    #[test]
    fn power_laws_fit_exactly() {
        let t1: Vec<_> = (1..=200).map(|j| (j, 3.0 / j as f64)).collect();
        assert!((rate_fit(&t1).unwrap().slope + 1.0).abs() < 1e-9);
        let t2: Vec<_> = (1..=200).map(|j| (j, 2.0 / (j as f64).sqrt())).collect();
        assert!((rate_fit(&t2).unwrap().slope + 0.5).abs() < 1e-9);
    }

    #[test]
    fn short_trace_is_rejected() {
        let t: Vec<_> = (1..=13).map(|j| (j, 1.0 / j as f64)).collect();
        assert!(matches!(rate_fit(&t), Err(Error::InsufficientTrace(4))));
        let mut t: Vec<_> = (1..=30).map(|j| (j, 1.0 / j as f64)).collect();
        for p in t.iter_mut().skip(12) {
            p.1 = 0.0;
        }
        assert!(matches!(rate_fit(&t), Err(Error::InsufficientTrace(3))));
    }

    #[test]
    fn clamping_keeps_raw_value() {
        assert_eq!(clamp_phi(-5e-10), 0.0);
        assert_eq!(clamp_phi(-2e-9), -2e-9);
        assert_eq!(clamp_phi(0.3), 0.3);
    }

    fn crowd_model(crowd: CrowdTerm) -> FiniteMFG {
        FiniteMFG::new(
            "c",
            4,
            1,
            Mode::Finite { horizon: 1 },
            vec![0.25; 4],
            None,
            Dynamics::Fixed(vec![Kernel::identity(4, 1)]),
            Arc::new(TabularReward::new(vec![vec![0.0]; 4], crowd)),
        )
    }

    #[test]
    fn monotonicity_reports() {
        let none = monotonicity_check(&crowd_model(CrowdTerm::None), 100, 1).unwrap();
        assert_eq!(none.max_value, 0.0);
        let log = monotonicity_check(&crowd_model(CrowdTerm::NegLog { weight: 1.0 }), 1000, 1)
            .unwrap();
        assert!(log.holds() && log.witness.is_none());
        let bad = monotonicity_check(&crowd_model(CrowdTerm::Linear { coef: 1.0 }), 10, 1)
            .unwrap();
        assert!(!bad.holds());
        let (a, b) = bad.witness.unwrap();
        let sq: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!((sq - bad.max_value).abs() < 1e-12);
    }
}
