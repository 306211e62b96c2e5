//! Population flows induced by a policy.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{solve_discounted, SparseRows};
use crate::model::{DistributionFlow, FiniteMFG, FlowKind, Kernel, PolicyFlow, UNIT_SYMBOL};
use crate::rng::{self, StreamRng};

/// One simulated path of a representative player.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTrajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    /// Slot (tree node) of each step.
    pub nodes: Vec<usize>,
    /// Reward collected at each step against the crowd flow used to sample.
    pub rewards: Vec<f64>,
    /// Leaf of the sampled scenario (depth `N + 1`).
    pub leaf: usize,
    pub seed: u64,
    pub index: u64,
}

fn check_policy(model: &FiniteMFG, policy: &PolicyFlow) -> Result<()> {
    policy.matches(model)?;
    policy.check_normalized()
}

/// `out(x') += Σ_x μ(x) Σ_a π(a|x) p(x'|x,a)`, summed in state order.
pub(crate) fn push_forward(kernel: &Kernel, policy: &[f64], mu: &[f64], out: &mut [f64]) {
    let na = kernel.num_actions();
    for (x, &m) in mu.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        for a in 0..na {
            let w = m * policy[x * na + a];
            if w == 0.0 {
                continue;
            }
            let (targets, probs) = kernel.row(x, a);
            for (&y, &p) in targets.iter().zip(probs) {
                out[y as usize] += w * p;
            }
        }
    }
}

/// Exact forward propagation of `policy` through every scenario.
///
/// `μ_{n+1}(·|child) = Σ_x μ_n(x|node) Σ_a π_n(a|x,node) p(·|x,a,ξ_child)`,
/// where the kernel also reads `μ_n(·|node)` for population-dependent
/// dynamics.
pub fn propagate_exact(model: &FiniteMFG, policy: &PolicyFlow) -> Result<DistributionFlow> {
    let horizon = model.require_finite("exact propagation")?;
    check_policy(model, policy)?;
    let tree = model.tree();
    let ns = model.num_states();
    let mut flow = DistributionFlow::zeros_for(model);
    flow.slice_mut(0).copy_from_slice(model.mu0());
    for depth in 0..horizon {
        let level: Vec<usize> = tree.level(depth).collect();
        let computed: Vec<(usize, Vec<f64>)> = level
            .par_iter()
            .flat_map_iter(|&node| {
                let mu = flow.slice(node);
                let pi = policy.slice(node);
                tree.children(node).iter().map(move |&child| {
                    let kernel = model.kernel(tree.node(child).symbol, mu);
                    let mut out = vec![0.0; ns];
                    push_forward(&kernel, pi, mu, &mut out);
                    (child, out)
                })
            })
            .collect();
        for (child, mass) in computed {
            flow.slice_mut(child).copy_from_slice(&mass);
        }
    }
    Ok(flow)
}

/// Monte Carlo estimate of the flow from `episodes` simulated players.
///
/// Players move in lockstep so that population-dependent kernels can read the
/// empirical distribution of the current step. Each player draws one tree
/// path; counts are normalized per visited node, and nodes no player reached
/// are flagged unestimated with zero mass.
pub fn estimate_empirical(
    model: &FiniteMFG,
    policy: &PolicyFlow,
    episodes: usize,
    seed: u64,
) -> Result<DistributionFlow> {
    let horizon = model.require_finite("empirical density estimation")?;
    check_policy(model, policy)?;
    if episodes == 0 {
        return Err(Error::InvalidParameter("episodes must be ≥ 1".into()));
    }
    let tree = model.tree();
    let (ns, na) = (model.num_states(), model.num_actions());

    let mut rngs: Vec<StreamRng> = (0..episodes as u64)
        .map(|k| rng::stream(seed, "density", k))
        .collect();
    let mut particles: Vec<(usize, usize)> = rngs
        .iter_mut()
        .map(|r| (0, rng::sample_index(model.mu0(), rng::uniform(r))))
        .collect();

    let mut flow = DistributionFlow::zeros_for(model);
    for depth in 0..=horizon {
        for node in tree.level(depth) {
            flow.set_estimated(node, false);
        }
        let mut visits = vec![0usize; model.num_slots()];
        for &(node, x) in &particles {
            flow.slice_mut(node)[x] += 1.0;
            visits[node] += 1;
        }
        for node in tree.level(depth) {
            if visits[node] > 0 {
                let v = visits[node] as f64;
                flow.slice_mut(node).iter_mut().for_each(|m| *m /= v);
                flow.set_estimated(node, true);
            }
        }
        if depth == horizon {
            break;
        }
        let kernels: Vec<Option<Vec<Kernel>>> = tree
            .level(depth)
            .map(|node| {
                (visits[node] > 0).then(|| {
                    tree.children(node)
                        .iter()
                        .map(|&c| model.kernel(tree.node(c).symbol, flow.slice(node)).into_owned())
                        .collect()
                })
            })
            .collect();
        let first = tree.level(depth).start;
        particles
            .par_iter_mut()
            .zip(rngs.par_iter_mut())
            .for_each(|((node, x), r)| {
                let a = rng::sample_index(&policy.row(*node, *x)[..na], rng::uniform(r));
                let children = tree.children(*node);
                let probs: Vec<f64> = children.iter().map(|&c| tree.node(c).cond_prob).collect();
                let c = rng::sample_index(&probs, rng::uniform(r));
                let kernel = &kernels[*node - first].as_ref().expect("visited")[c];
                *x = kernel.sample(*x, a, rng::uniform(r));
                *node = children[c];
            });
        debug_assert!(particles.iter().all(|&(_, x)| x < ns));
    }
    Ok(flow)
}

/// Simulates one player against a fixed crowd flow, drawing a full scenario.
pub fn sample_trajectory(
    model: &FiniteMFG,
    policy: &PolicyFlow,
    crowd: &DistributionFlow,
    rng: &mut StreamRng,
) -> Result<SampleTrajectory> {
    let horizon = model.require_finite("trajectory sampling")?;
    policy.matches(model)?;
    crowd.matches(model)?;
    let tree = model.tree();
    let na = model.num_actions();
    let mut out = SampleTrajectory {
        states: Vec::with_capacity(horizon + 1),
        actions: Vec::with_capacity(horizon + 1),
        nodes: Vec::with_capacity(horizon + 1),
        rewards: Vec::with_capacity(horizon + 1),
        leaf: 0,
        seed: 0,
        index: 0,
    };
    let mut x = rng::sample_index(model.mu0(), rng::uniform(rng));
    let mut node = 0;
    for _ in 0..=horizon {
        let a = rng::sample_index(policy.row(node, x), rng::uniform(rng));
        let children = tree.children(node);
        let probs: Vec<f64> = children.iter().map(|&c| tree.node(c).cond_prob).collect();
        let child = children[rng::sample_index(&probs, rng::uniform(rng))];
        let symbol = tree.node(child).symbol;
        let mu = crowd.slice(node);
        let r = model.reward_table(symbol, mu)[x * na + a];
        out.states.push(x);
        out.actions.push(a);
        out.nodes.push(node);
        out.rewards.push(r);
        x = model.kernel(symbol, mu).sample(x, a, rng::uniform(rng));
        node = child;
    }
    out.leaf = node;
    Ok(out)
}

/// Policy-averaged kernel `P^π(x'|x)` of a stationary policy, as sparse rows.
pub(crate) fn policy_matrix(kernel: &Kernel, policy: &[f64]) -> SparseRows {
    let (ns, na) = (kernel.num_states(), kernel.num_actions());
    (0..ns)
        .map(|x| {
            let mut dense: Vec<(usize, f64)> = Vec::new();
            for a in 0..na {
                let w = policy[x * na + a];
                if w == 0.0 {
                    continue;
                }
                let (targets, probs) = kernel.row(x, a);
                for (&y, &p) in targets.iter().zip(probs) {
                    match dense.iter_mut().find(|(j, _)| *j == y as usize) {
                        Some(e) => e.1 += w * p,
                        None => dense.push((y as usize, w * p)),
                    }
                }
            }
            dense
        })
        .collect()
}

/// γ-occupancy measure `μ_γ = μ0 + γ (P^π)ᵀ μ_γ` of a stationary policy.
pub fn occupancy_measure(model: &FiniteMFG, policy: &PolicyFlow) -> Result<DistributionFlow> {
    let gamma = model.require_discounted("occupancy measure")?;
    check_policy(model, policy)?;
    if model.depends_on_population() {
        return Err(Error::ModeMismatch(
            "occupancy measures need population-independent dynamics".into(),
        ));
    }
    let kernel = model.kernel(UNIT_SYMBOL, model.mu0());
    let p = policy_matrix(&kernel, policy.slice(0));
    let occ = solve_discounted(&p, gamma, model.mu0(), true)?;
    DistributionFlow::from_slices(FlowKind::Occupancy { gamma }, vec![occ])
}

/// `((j-1)/j) · average + (1/j) · new`, slot by slot.
///
/// When only one side of a slot is estimated, that side is taken as is.
pub fn mix_flows(
    average: &DistributionFlow,
    new: &DistributionFlow,
    j: usize,
) -> Result<DistributionFlow> {
    if j == 0 {
        return Err(Error::InvalidParameter("iteration index must be ≥ 1".into()));
    }
    average.same_shape(new)?;
    if j == 1 {
        return Ok(new.clone());
    }
    let (wa, wn) = ((j - 1) as f64 / j as f64, 1.0 / j as f64);
    let mut out = new.clone();
    for s in 0..new.num_slots() {
        match (average.is_estimated(s), new.is_estimated(s)) {
            (true, true) => {
                for ((o, a), n) in out.slice_mut(s).iter_mut().zip(average.slice(s)).zip(new.slice(s)) {
                    *o = wa * a + wn * n;
                }
            }
            (true, false) => {
                out.slice_mut(s).copy_from_slice(average.slice(s));
                out.set_estimated(s, true);
            }
            _ => {}
        }
    }
    Ok(out)
}
