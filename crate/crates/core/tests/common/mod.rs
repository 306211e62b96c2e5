//! Independent reference computations shared by the integration tests.
//!
//! Everything here walks the scenario tree directly and only reads the
//! model's primitives (`kernel`, `reward_table`, `mu0`).
#![allow(dead_code)]

use std::sync::Arc;

use mfg_fp::model::{
    CrowdTerm, DistributionFlow, Dynamics, FiniteMFG, FlowKind, Kernel, MeanFieldDynamics, Mode,
    NoiseTree, PolicyFlow, Symbol, TabularReward,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn random_kernel(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> Kernel {
    let rows: Vec<Vec<Vec<f64>>> = (0..ns)
        .map(|_| (0..na).map(|_| simplex(rng, ns)).collect())
        .collect();
    Kernel::from_dense(&rows)
}

/// `p = (1 - μ(0)) K_a + μ(0) K_b` for each symbol.
#[derive(Debug)]
struct Blend {
    pairs: Vec<(Kernel, Kernel)>,
}

impl MeanFieldDynamics for Blend {
    fn kernel(&self, symbol: Symbol, mu: &[f64]) -> Kernel {
        let (ka, kb) = &self.pairs[(symbol as usize).min(self.pairs.len() - 1)];
        let w = mu[0];
        Kernel::from_fn(ka.num_states(), ka.num_actions(), |x, a, row| {
            let (t, p) = ka.row(x, a);
            row.extend(t.iter().zip(p).map(|(&y, &p)| (y as usize, (1.0 - w) * p)));
            let (t, p) = kb.row(x, a);
            row.extend(t.iter().zip(p).map(|(&y, &p)| (y as usize, w * p)));
        })
    }
}

/// Random finite game with `|X| ≤ 3`, `|A| ≤ 2`, `N ≤ 3` and at most
/// `max_cells` (slot, state) pairs, so deterministic policies can be listed.
pub fn random_instance(seed: u64, max_cells: usize) -> FiniteMFG {
    let mut rng = rng(seed);
    loop {
        let ns = rng.random_range(1..=3);
        let na = rng.random_range(1..=2);
        let horizon = rng.random_range(0..=3);
        let branchy = rng.random_bool(0.5);
        let mut tree_rng = ChaCha8Rng::seed_from_u64(rng.random());
        let tree = NoiseTree::build(horizon + 1, usize::MAX, |_| {
            if branchy && tree_rng.random_bool(0.4) {
                let p = tree_rng.random_range(0.1..0.9);
                vec![(0, p), (1, 1.0 - p)]
            } else {
                vec![(tree_rng.random_range(0..2), 1.0)]
            }
        })
        .unwrap();
        if tree.num_nodes_through(horizon) * ns > max_cells {
            continue;
        }
        let tables: Vec<Vec<Vec<f64>>> = (0..2)
            .map(|_| {
                (0..ns)
                    .map(|_| (0..na).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        let crowd = match rng.random_range(0..3) {
            0 => CrowdTerm::None,
            1 => CrowdTerm::NegLog {
                weight: rng.random_range(0.0..1.0),
            },
            _ => CrowdTerm::Linear {
                coef: rng.random_range(-2.0..2.0),
            },
        };
        let dynamics = if rng.random_bool(0.3) {
            let pairs = (0..2)
                .map(|_| (random_kernel(&mut rng, ns, na), random_kernel(&mut rng, ns, na)))
                .collect();
            Dynamics::MeanField(Arc::new(Blend { pairs }))
        } else {
            Dynamics::Fixed((0..2).map(|_| random_kernel(&mut rng, ns, na)).collect())
        };
        let mu0 = simplex(&mut rng, ns);
        return FiniteMFG::new(
            format!("random_{seed}"),
            ns,
            na,
            Mode::Finite { horizon },
            mu0,
            Some(tree),
            dynamics,
            Arc::new(TabularReward::per_symbol(tables, crowd)),
        );
    }
}

/// Random stochastic policy for `model`.
pub fn random_policy(model: &FiniteMFG, seed: u64) -> PolicyFlow {
    let mut rng = rng(seed);
    let na = model.num_actions();
    let mut probs = Vec::new();
    for _ in 0..model.num_slots() * model.num_states() {
        probs.extend(simplex(&mut rng, na));
    }
    PolicyFlow::from_raw(model.num_slots(), model.num_states(), na, probs).unwrap()
}

fn step(model: &FiniteMFG, policy: &[f64], mu_node: &[f64], symbol: Symbol, nu: &[f64]) -> Vec<f64> {
    let (ns, na) = (model.num_states(), model.num_actions());
    let k = model.kernel(symbol, mu_node);
    let mut out = vec![0.0; ns];
    for x in 0..ns {
        for a in 0..na {
            let w = nu[x] * policy[x * na + a];
            let (t, p) = k.row(x, a);
            for (&y, &p) in t.iter().zip(p) {
                out[y as usize] += w * p;
            }
        }
    }
    out
}

/// Population flow of `policy`, node by node.
pub fn flow(model: &FiniteMFG, policy: &PolicyFlow) -> Vec<Vec<f64>> {
    let tree = model.tree();
    let horizon = model.horizon().unwrap();
    let mut mu = vec![Vec::new(); model.num_slots()];
    mu[0] = model.mu0().to_vec();
    for depth in 0..horizon {
        for node in tree.level(depth) {
            for &c in tree.children(node) {
                mu[c] = step(model, policy.slice(node), &mu[node], tree.node(c).symbol, &mu[node]);
            }
        }
    }
    mu
}

pub fn as_flow(mu: Vec<Vec<f64>>) -> DistributionFlow {
    DistributionFlow::from_slices(FlowKind::Finite, mu).unwrap()
}

fn value(model: &FiniteMFG, policy: &PolicyFlow, mu: &[Vec<f64>], node: usize, nu: &[f64]) -> f64 {
    let tree = model.tree();
    let horizon = model.horizon().unwrap();
    let na = model.num_actions();
    let pi = policy.slice(node);
    let mut total = 0.0;
    for &c in tree.children(node) {
        let sym = tree.node(c).symbol;
        let r = model.reward_table(sym, &mu[node]);
        let mut gain = 0.0;
        for (x, &m) in nu.iter().enumerate() {
            for a in 0..na {
                gain += m * pi[x * na + a] * r[x * na + a];
            }
        }
        if tree.node(c).depth <= horizon {
            gain += value(model, policy, mu, c, &step(model, pi, &mu[node], sym, nu));
        }
        total += tree.node(c).cond_prob * gain;
    }
    total
}

/// `J(π, μ)` by recursion over the tree.
pub fn expected_return(model: &FiniteMFG, policy: &PolicyFlow, mu: &[Vec<f64>]) -> f64 {
    value(model, policy, mu, 0, model.mu0())
}

/// Best return against `mu` over every deterministic policy.
pub fn brute_force_best(model: &FiniteMFG, mu: &[Vec<f64>]) -> f64 {
    let (ns, na, slots) = (model.num_states(), model.num_actions(), model.num_slots());
    let cells = ns * slots;
    let count = na.pow(cells as u32);
    let mut best = f64::NEG_INFINITY;
    for code in 0..count {
        let mut c = code;
        let mut choice = vec![0; cells];
        for v in choice.iter_mut() {
            *v = c % na;
            c /= na;
        }
        let pol = PolicyFlow::deterministic(model, |s, x| choice[s * ns + x]);
        best = best.max(expected_return(model, &pol, mu));
    }
    best
}

/// `max_π' J(π', μ^π) - J(π, μ^π)` by enumeration.
pub fn brute_force_exploitability(model: &FiniteMFG, policy: &PolicyFlow) -> f64 {
    let mu = flow(model, policy);
    brute_force_best(model, &mu) - expected_return(model, policy, &mu)
}

/// Classical RK4 for `η̇ = 2(K+q)η + η² - (κ-q²)`, integrated backward from
/// `η_T = c`; returns `η` at `t = nΔ`.
pub fn riccati_rk4(k: f64, q: f64, kappa: f64, c: f64, dt: f64, horizon: usize, sub: usize) -> Vec<f64> {
    let f = |eta: f64| 2.0 * (k + q) * eta + eta * eta - (kappa - q * q);
    let h = -dt / sub as f64;
    let mut eta = c;
    let mut out = vec![0.0; horizon + 1];
    out[horizon] = eta;
    for n in (0..horizon).rev() {
        for _ in 0..sub {
            let k1 = f(eta);
            let k2 = f(eta + 0.5 * h * k1);
            let k3 = f(eta + 0.5 * h * k2);
            let k4 = f(eta + h * k3);
            eta += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out[n] = eta;
    }
    out
}
