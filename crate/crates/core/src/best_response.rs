//! Best responses against a fixed population flow.

use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::policy_matrix;
use crate::error::{Error, Result};
use crate::linalg::solve_discounted;
use crate::model::{DistributionFlow, FiniteMFG, Kernel, PolicyFlow, QTable, ValueTable, UNIT_SYMBOL};
use crate::rng::{self, StreamRng};

/// Tabular Q-learning settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QLearningConfig {
    /// Episodes per call; `None` means `10 · |X| · N`.
    #[serde(default)]
    pub episodes: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_alpha() -> f64 {
    0.1
}

fn default_epsilon() -> f64 {
    0.2
}

impl Default for QLearningConfig {
    fn default() -> Self {
        Self {
            episodes: None,
            alpha: default_alpha(),
            epsilon: default_epsilon(),
            seed: 0,
        }
    }
}

impl QLearningConfig {
    pub fn episodes_for(&self, model: &FiniteMFG) -> usize {
        self.episodes.unwrap_or_else(|| {
            10 * model.num_states() * model.horizon().unwrap_or(1).max(1)
        })
    }

    pub fn check(&self) -> Result<()> {
        if self.episodes == Some(0) {
            return Err(Error::InvalidParameter("episodes must be ≥ 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate {} is outside (0, 1]",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!(
                "exploration {} is outside [0, 1]",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Index of the largest entry; ties go to the lowest index.
#[inline]
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = a;
        }
    }
    best
}

/// Deterministic greedy policy of `q`, ties to the lowest action.
pub fn greedy_policy(q: &QTable) -> PolicyFlow {
    let (slots, ns, na) = (q.num_slots(), q.num_states(), q.num_actions());
    let mut probs = vec![0.0; slots * ns * na];
    for (i, row) in q.as_slice().chunks(na).enumerate() {
        probs[i * na + argmax(row)] = 1.0;
    }
    PolicyFlow::from_raw(slots, ns, na, probs).expect("shape follows the table")
}

fn check_flow(model: &FiniteMFG, mu: &DistributionFlow) -> Result<()> {
    mu.matches(model)
}

/// Fills `Q_n(·,·|node)` for every node at `depth`, given `V_{n+1}` on the
/// next level. `cont` picks the continuation value of a child.
fn q_level(
    model: &FiniteMFG,
    mu: &DistributionFlow,
    depth: usize,
    horizon: usize,
    next_v: impl Fn(usize, usize) -> f64 + Sync,
    q: &mut QTable,
) {
    let tree = model.tree();
    let na = model.num_actions();
    let level = tree.level(depth);
    let results: Vec<(usize, Vec<f64>)> = level
        .into_par_iter()
        .map(|node| {
            let m = mu.slice(node);
            let mut out = vec![0.0; model.num_states() * na];
            for (i, &child) in tree.children(node).iter().enumerate() {
                let cn = tree.node(child);
                let r = model.reward_table(cn.symbol, m);
                let kernel = model.kernel(cn.symbol, m);
                out.par_chunks_mut(na).enumerate().for_each(|(x, row)| {
                    for (a, slot) in row.iter_mut().enumerate() {
                        let mut term = r[x * na + a];
                        if depth < horizon {
                            let (targets, probs) = kernel.row(x, a);
                            let mut cont = 0.0;
                            for (&y, &p) in targets.iter().zip(probs) {
                                cont += p * next_v(child, y as usize);
                            }
                            term += cont;
                        }
                        if i == 0 {
                            *slot = cn.cond_prob * term;
                        } else {
                            *slot += cn.cond_prob * term;
                        }
                    }
                });
            }
            (node, out)
        })
        .collect();
    for (node, out) in results {
        q.slice_mut(node).copy_from_slice(&out);
    }
}

/// Exact dynamic programming against `mu`, scenario by scenario.
///
/// `Q_n(x,a|node) = Σ_child P(child|node) [r(x,a,μ_n(node),ξ) + Σ_x' p(x'|x,a,ξ) V_{n+1}(x'|child)]`
/// with `V = max_a Q`. Returns the Q table and its greedy policy.
pub fn backward_induction(
    model: &FiniteMFG,
    mu: &DistributionFlow,
) -> Result<(QTable, PolicyFlow)> {
    let horizon = model.require_finite("backward induction")?;
    check_flow(model, mu)?;
    let ns = model.num_states();
    let mut q = QTable::zeros_for(model);
    let mut v = ValueTable::zeros(model.num_slots(), ns);
    for depth in (0..=horizon).rev() {
        q_level(model, mu, depth, horizon, |c, y| v.get(c, y), &mut q);
        for node in model.tree().level(depth) {
            for x in 0..ns {
                let row = q.row(node, x);
                v.set(node, x, row[argmax(row)]);
            }
        }
    }
    let policy = greedy_policy(&q);
    Ok((q, policy))
}

/// Q function of a fixed policy against `mu` (finite horizon).
pub fn evaluate_policy_q(
    model: &FiniteMFG,
    policy: &PolicyFlow,
    mu: &DistributionFlow,
) -> Result<QTable> {
    let horizon = model.require_finite("policy evaluation")?;
    check_flow(model, mu)?;
    policy.matches(model)?;
    let (ns, na) = (model.num_states(), model.num_actions());
    let mut q = QTable::zeros_for(model);
    let mut v = ValueTable::zeros(model.num_slots(), ns);
    for depth in (0..=horizon).rev() {
        q_level(model, mu, depth, horizon, |c, y| v.get(c, y), &mut q);
        for node in model.tree().level(depth) {
            for x in 0..ns {
                let val = q
                    .row(node, x)
                    .iter()
                    .zip(policy.row(node, x))
                    .map(|(q, p)| q * p)
                    .sum();
                v.set(node, x, val);
            }
        }
    }
    debug_assert_eq!(q.num_actions(), na);
    Ok(q)
}

/// Mutable Q-learning state, kept across calls for warm starts.
#[derive(Clone, Debug)]
pub struct QLearner {
    pub config: QLearningConfig,
    q: QTable,
    rng: StreamRng,
}

impl QLearner {
    pub fn new(model: &FiniteMFG, config: QLearningConfig) -> Result<Self> {
        model.require_finite("Q-learning")?;
        config.check()?;
        let rng = rng::stream(config.seed, "q_learning", 0);
        Ok(Self {
            q: QTable::zeros_for(model),
            config,
            rng,
        })
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }

    /// Forgets the table, keeping the random stream.
    pub fn reset(&mut self) {
        self.q = QTable::zeros(self.q.num_slots(), self.q.num_states(), self.q.num_actions());
    }

    /// Runs the configured number of episodes against `mu`.
    ///
    /// The transition kernel is only sampled. Each episode draws a scenario
    /// path from the tree.
    pub fn train(&mut self, model: &FiniteMFG, mu: &DistributionFlow) -> Result<PolicyFlow> {
        let horizon = model.require_finite("Q-learning")?;
        check_flow(model, mu)?;
        let tree = model.tree();
        let na = model.num_actions();
        let (alpha, eps) = (self.config.alpha, self.config.epsilon);
        let episodes = self.config.episodes_for(model);
        let rng = &mut self.rng;
        let q = &mut self.q;
        // Reward table and kernel of each edge, built on first use.
        let mut edges: Vec<Option<(Vec<f64>, Cow<'_, Kernel>)>> =
            (0..tree.num_nodes()).map(|_| None).collect();
        for _ in 0..episodes {
            let mut x = rng::sample_index(model.mu0(), rng::uniform(rng));
            let mut node = 0;
            for n in 0..=horizon {
                let a = if rng::uniform(rng) < eps {
                    ((rng::uniform(rng) * na as f64) as usize).min(na - 1)
                } else {
                    argmax(q.row(node, x))
                };
                let children = tree.children(node);
                let u = rng::uniform(rng);
                let child = if children.len() == 1 {
                    children[0]
                } else {
                    let probs: Vec<f64> =
                        children.iter().map(|&c| tree.node(c).cond_prob).collect();
                    children[rng::sample_index(&probs, u)]
                };
                let (rewards, kernel) = edges[child].get_or_insert_with(|| {
                    let symbol = tree.node(child).symbol;
                    let m = mu.slice(node);
                    (model.reward_table(symbol, m), model.kernel(symbol, m))
                });
                let r = rewards[x * na + a];
                let (target, next) = if n < horizon {
                    let y = kernel.sample(x, a, rng::uniform(rng));
                    let best = q.row(child, y).iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (r + best, Some(y))
                } else {
                    (r, None)
                };
                let cell = &mut q.row_mut(node, x)[a];
                *cell = (1.0 - alpha) * *cell + alpha * target;
                match next {
                    Some(y) => {
                        x = y;
                        node = child;
                    }
                    None => break,
                }
            }
        }
        Ok(greedy_policy(&self.q))
    }
}

/// Tabular Q-learning from a zero table.
pub fn q_learning(
    model: &FiniteMFG,
    mu: &DistributionFlow,
    cfg: &QLearningConfig,
) -> Result<(QTable, PolicyFlow)> {
    let mut learner = QLearner::new(model, cfg.clone())?;
    let policy = learner.train(model, mu)?;
    Ok((learner.q, policy))
}

/// Values `V^π` of a stationary policy against a fixed occupancy flow.
pub fn evaluate_policy_discounted(
    model: &FiniteMFG,
    policy: &PolicyFlow,
    mu: &DistributionFlow,
) -> Result<Vec<f64>> {
    let gamma = model.require_discounted("discounted policy evaluation")?;
    check_flow(model, mu)?;
    policy.matches(model)?;
    let na = model.num_actions();
    let r = model.reward_table(UNIT_SYMBOL, &mu.distribution(0));
    let pi = policy.slice(0);
    let kernel = model.kernel(UNIT_SYMBOL, model.mu0());
    let p = policy_matrix(&kernel, pi);
    let r_pi: Vec<f64> = (0..model.num_states())
        .map(|x| (0..na).map(|a| pi[x * na + a] * r[x * na + a]).sum())
        .collect();
    solve_discounted(&p, gamma, &r_pi, false)
}

fn discounted_q(model: &FiniteMFG, r: &[f64], v: &[f64], gamma: f64) -> QTable {
    let (ns, na) = (model.num_states(), model.num_actions());
    let kernel = model.kernel(UNIT_SYMBOL, model.mu0());
    let mut q = QTable::zeros(1, ns, na);
    for x in 0..ns {
        for a in 0..na {
            let (targets, probs) = kernel.row(x, a);
            let cont: f64 = targets.iter().zip(probs).map(|(&y, &p)| p * v[y as usize]).sum();
            q.row_mut(0, x)[a] = r[x * na + a] + gamma * cont;
        }
    }
    q
}

/// Howard policy iteration for the discounted game with `mu` frozen.
///
/// Rewards read the normalized occupancy `(1 - γ) μ_γ`. An action is only
/// replaced by a strictly better one, so the loop stops at a stable policy.
pub fn policy_iteration_discounted(
    model: &FiniteMFG,
    mu: &DistributionFlow,
) -> Result<(QTable, PolicyFlow)> {
    let gamma = model.require_discounted("policy iteration")?;
    check_flow(model, mu)?;
    let (ns, na) = (model.num_states(), model.num_actions());
    let r = model.reward_table(UNIT_SYMBOL, &mu.distribution(0));
    let mut actions: Vec<usize> = (0..ns).map(|x| argmax(&r[x * na..(x + 1) * na])).collect();
    let scale = r.iter().fold(1.0f64, |m, v| m.max(v.abs())) / (1.0 - gamma);
    for _ in 0..10_000 {
        let policy = PolicyFlow::deterministic(model, |_, x| actions[x]);
        let v = evaluate_policy_discounted(model, &policy, mu)?;
        let q = discounted_q(model, &r, &v, gamma);
        let mut changed = false;
        for (x, current) in actions.iter_mut().enumerate() {
            let row = q.row(0, x);
            let best = argmax(row);
            if row[best] > row[*current] + 1e-12 * scale {
                *current = best;
                changed = true;
            }
        }
        if !changed {
            return Ok((q, policy));
        }
    }
    Err(Error::InvalidParameter("policy iteration did not stabilize".into()))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::distribution::propagate_exact;
    use crate::model::{CrowdTerm, Dynamics, Kernel, Mode, TabularReward};

    fn single(horizon: usize, reward: f64) -> FiniteMFG {
        FiniteMFG::new(
            "one",
            1,
            1,
            Mode::Finite { horizon },
            vec![1.0],
            None,
            Dynamics::Fixed(vec![Kernel::identity(1, 1)]),
            Arc::new(TabularReward::new(vec![vec![reward]], CrowdTerm::None)),
        )
    }

    #[test]
    fn greedy_breaks_ties_low() {
        let mut q = QTable::zeros(1, 3, 3);
        q.row_mut(0, 0).copy_from_slice(&[1.0, 3.0, 2.0]);
        q.row_mut(0, 1).copy_from_slice(&[2.0, 2.0, 0.0]);
        let p = greedy_policy(&q);
        assert_eq!(p.action_of(0, 0), Some(1));
        assert_eq!(p.action_of(0, 1), Some(0));
        assert_eq!(p.action_of(0, 2), Some(0));
    }

    #[test]
    fn terminal_only_is_argmax_reward() {
        let m = FiniteMFG::new(
            "t",
            2,
            3,
            Mode::Finite { horizon: 0 },
            vec![0.5, 0.5],
            None,
            Dynamics::Fixed(vec![Kernel::identity(2, 3)]),
            Arc::new(TabularReward::new(
                vec![vec![0.0, 2.0, 1.0], vec![5.0, 5.0, -1.0]],
                CrowdTerm::None,
            )),
        );
        let mu = propagate_exact(&m, &PolicyFlow::uniform(&m)).unwrap();
        let (q, p) = backward_induction(&m, &mu).unwrap();
        assert_eq!(q.row(0, 0), &[0.0, 2.0, 1.0]);
        assert_eq!(p.action_of(0, 0), Some(1));
        assert_eq!(p.action_of(0, 1), Some(0));
    }

    #[test]
    fn scalar_q_learning_closed_form() {
        let m = single(0, 1.0);
        let mu = propagate_exact(&m, &PolicyFlow::uniform(&m)).unwrap();
        for k in [1usize, 5, 30] {
            let cfg = QLearningConfig {
                episodes: Some(k),
                ..Default::default()
            };
            let (q, _) = q_learning(&m, &mu, &cfg).unwrap();
            let want = 1.0 - 0.9f64.powi(k as i32);
            assert!((q.row(0, 0)[0] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn discounted_backends_reject_finite_models() {
        let m = single(2, 1.0);
        let mu = propagate_exact(&m, &PolicyFlow::uniform(&m)).unwrap();
        assert!(matches!(
            policy_iteration_discounted(&m, &mu),
            Err(Error::ModeMismatch(_))
        ));
    }

    #[test]
    fn identity_kernel_policy_iteration_is_myopic() {
        let r = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 3.5]];
        let m = FiniteMFG::new(
            "id",
            3,
            2,
            Mode::Discounted { gamma: 0.9 },
            vec![1.0 / 3.0; 3],
            None,
            Dynamics::Fixed(vec![Kernel::identity(3, 2)]),
            Arc::new(TabularReward::new(r, CrowdTerm::None)),
        );
        let mu = crate::distribution::occupancy_measure(&m, &PolicyFlow::uniform(&m)).unwrap();
        let (_, p) = policy_iteration_discounted(&m, &mu).unwrap();
        assert_eq!(
            (0..3).map(|x| p.action_of(0, x).unwrap()).collect::<Vec<_>>(),
            vec![0, 1, 1]
        );
    }
}
