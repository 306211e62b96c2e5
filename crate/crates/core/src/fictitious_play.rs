//! Discrete-time Fictitious Play.
//!
//! Iteration `j` plays a best response `π^j` against the running average
//! flow `μ̄^{j-1}`, then folds `μ^{π^j}` into `μ̄` with weight `1/j` and
//! `π^j` into the flow-weighted average policy `π̄`.

use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::best_response::{
    backward_induction, policy_iteration_discounted, QLearner, QLearningConfig,
};
use crate::distribution::{estimate_empirical, mix_flows};
use crate::error::{Error, Result};
use crate::metrics::{deviation_gain, exploitability, induced_flow};
use crate::model::{DistributionFlow, FiniteMFG, PolicyFlow};
use crate::rng;

/// Best-response backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BrBackend {
    /// Backward induction, or policy iteration in discounted mode.
    Exact,
    QLearning {
        #[serde(default)]
        q: QLearningConfig,
        /// Keep the Q table between iterations.
        #[serde(default = "yes")]
        warm_start: bool,
    },
}

/// Density backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityBackend {
    /// Exact propagation, or the occupancy measure in discounted mode.
    Exact,
    Empirical { episodes: usize },
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FpConfig {
    pub iterations: usize,
    pub eval_every: usize,
    pub seed: u64,
    pub br: BrBackend,
    pub density: DensityBackend,
    /// Iterations whose `μ̄` is kept; `None` means 1, 2, 5, 10, 20, 50, ...
    #[serde(default)]
    pub snapshots: Option<Vec<usize>>,
    /// Keep every best-response flow `μ^{π^j}` (small runs only).
    #[serde(default)]
    pub keep_flows: bool,
    /// Also log the gain of the learned best response (model-free runs).
    #[serde(default)]
    pub log_proxy: bool,
}

impl FpConfig {
    pub fn model_based(iterations: usize) -> Self {
        Self {
            iterations,
            eval_every: 1,
            seed: 0,
            br: BrBackend::Exact,
            density: DensityBackend::Exact,
            snapshots: None,
            keep_flows: false,
            log_proxy: false,
        }
    }

    pub fn model_free(iterations: usize, q: QLearningConfig, episodes: usize) -> Self {
        Self {
            br: BrBackend::QLearning {
                q,
                warm_start: true,
            },
            density: DensityBackend::Empirical { episodes },
            ..Self::model_based(iterations)
        }
    }

    pub fn check(&self, model: &FiniteMFG) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be ≥ 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidParameter("eval_every must be ≥ 1".into()));
        }
        if model.is_discounted()
            && (self.br != BrBackend::Exact || self.density != DensityBackend::Exact)
        {
            return Err(Error::ModeMismatch(
                "the discounted game supports the model-based backends only".into(),
            ));
        }
        if let BrBackend::QLearning { q, .. } = &self.br {
            q.check()?;
        }
        if let DensityBackend::Empirical { episodes } = self.density {
            if episodes == 0 {
                return Err(Error::InvalidParameter("density episodes must be ≥ 1".into()));
            }
        }
        Ok(())
    }

    /// Whether `j` is a snapshot iteration.
    pub fn snapshot_at(&self, j: usize) -> bool {
        match &self.snapshots {
            Some(list) => list.contains(&j),
            None => is_geometric(j),
        }
    }

    fn evaluate_at(&self, j: usize) -> bool {
        j <= 1 || j.is_multiple_of(self.eval_every) || j == self.iterations
    }
}

/// `j ∈ {1, 2, 5} · 10^k`.
pub fn is_geometric(j: usize) -> bool {
    if j == 0 {
        return false;
    }
    let mut m = j;
    while m.is_multiple_of(10) {
        m /= 10;
    }
    matches!(m, 1 | 2 | 5)
}

/// Running numerator and denominator of the flow-weighted policy average.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyAverager {
    slots: usize,
    num_states: usize,
    num_actions: usize,
    num: Vec<f64>,
    den: Vec<f64>,
}

impl PolicyAverager {
    pub fn new(slots: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            slots,
            num_states,
            num_actions,
            num: vec![0.0; slots * num_states * num_actions],
            den: vec![0.0; slots * num_states],
        }
    }

    pub fn for_model(model: &FiniteMFG) -> Self {
        Self::new(model.num_slots(), model.num_states(), model.num_actions())
    }

    /// Adds `μ(x) π(a|x)` and `μ(x)`.
    pub fn add(&mut self, flow: &DistributionFlow, policy: &PolicyFlow) -> Result<()> {
        if flow.num_slots() != self.slots
            || flow.num_states() != self.num_states
            || policy.num_slots() != self.slots
            || policy.num_states() != self.num_states
            || policy.num_actions() != self.num_actions
        {
            return Err(Error::ShapeMismatch("averager, flow and policy differ in shape".into()));
        }
        let na = self.num_actions;
        for (i, &m) in flow.as_slice().iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            self.den[i] += m;
            let p = &policy.as_slice()[i * na..(i + 1) * na];
            for (n, &pa) in self.num[i * na..(i + 1) * na].iter_mut().zip(p) {
                *n += m * pa;
            }
        }
        Ok(())
    }

    /// Current `π̄`; rows without mass are uniform.
    pub fn policy(&self) -> PolicyFlow {
        let na = self.num_actions;
        let uniform = 1.0 / na as f64;
        let mut probs = vec![uniform; self.num.len()];
        for (i, &d) in self.den.iter().enumerate() {
            if d > 0.0 {
                for a in 0..na {
                    probs[i * na + a] = self.num[i * na + a] / d;
                }
            }
        }
        PolicyFlow::from_raw(self.slots, self.num_states, na, probs).expect("shape is fixed")
    }
}

/// Folds one best response into the running average and returns `π̄`.
pub fn average_policy_update(
    averager: &mut PolicyAverager,
    new_flow: &DistributionFlow,
    new_policy: &PolicyFlow,
) -> Result<PolicyFlow> {
    averager.add(new_flow, new_policy)?;
    Ok(averager.policy())
}

/// Computes a best response to a flow.
pub trait BestResponder {
    fn best_response(&mut self, model: &FiniteMFG, mu: &DistributionFlow) -> Result<PolicyFlow>;
    fn name(&self) -> &'static str;
}

/// Computes the flow a policy induces.
pub trait DensityEstimator {
    fn flow(&mut self, model: &FiniteMFG, policy: &PolicyFlow, j: usize)
        -> Result<DistributionFlow>;
    fn name(&self) -> &'static str;
}

pub struct ExactBr;

impl BestResponder for ExactBr {
    fn best_response(&mut self, model: &FiniteMFG, mu: &DistributionFlow) -> Result<PolicyFlow> {
        Ok(if model.is_discounted() {
            policy_iteration_discounted(model, mu)?.1
        } else {
            backward_induction(model, mu)?.1
        })
    }

    fn name(&self) -> &'static str {
        "exact"
    }
}

pub struct QLearningBr {
    learner: QLearner,
    warm_start: bool,
}

impl QLearningBr {
    pub fn new(model: &FiniteMFG, config: QLearningConfig, warm_start: bool) -> Result<Self> {
        Ok(Self {
            learner: QLearner::new(model, config)?,
            warm_start,
        })
    }
}

impl BestResponder for QLearningBr {
    fn best_response(&mut self, model: &FiniteMFG, mu: &DistributionFlow) -> Result<PolicyFlow> {
        if !self.warm_start {
            self.learner.reset();
        }
        self.learner.train(model, mu)
    }

    fn name(&self) -> &'static str {
        "q_learning"
    }
}

pub struct ExactDensity;

impl DensityEstimator for ExactDensity {
    fn flow(&mut self, model: &FiniteMFG, policy: &PolicyFlow, _j: usize) -> Result<DistributionFlow> {
        induced_flow(model, policy)
    }

    fn name(&self) -> &'static str {
        "exact"
    }
}

pub struct EmpiricalDensity {
    pub episodes: usize,
    pub seed: u64,
}

impl DensityEstimator for EmpiricalDensity {
    fn flow(&mut self, model: &FiniteMFG, policy: &PolicyFlow, j: usize) -> Result<DistributionFlow> {
        let seed = rng::stream(self.seed, "density_iteration", j as u64).next_u64();
        estimate_empirical(model, policy, self.episodes, seed)
    }

    fn name(&self) -> &'static str {
        "empirical"
    }
}

/// Loop state after `iteration` steps.
#[derive(Clone, Debug)]
pub struct FpState {
    pub iteration: usize,
    pub mu_bar: DistributionFlow,
    pub pi_bar: PolicyFlow,
    pub last_br: PolicyFlow,
    /// `μ^{π^j}` from the density backend.
    pub last_flow: DistributionFlow,
    pub averager: PolicyAverager,
    pub seed: u64,
}

impl FpState {
    /// `j = 0`: `π̄ = π_0` and `μ̄` is its induced flow.
    pub fn new(
        model: &FiniteMFG,
        pi0: PolicyFlow,
        density: &mut dyn DensityEstimator,
        seed: u64,
    ) -> Result<Self> {
        pi0.matches(model)?;
        let mu0 = density.flow(model, &pi0, 0)?;
        Ok(Self {
            iteration: 0,
            mu_bar: mu0.clone(),
            last_flow: mu0,
            last_br: pi0.clone(),
            pi_bar: pi0,
            averager: PolicyAverager::for_model(model),
            seed,
        })
    }
}

/// One Fictitious Play iteration.
pub fn fp_step(
    mut state: FpState,
    model: &FiniteMFG,
    br: &mut dyn BestResponder,
    density: &mut dyn DensityEstimator,
) -> Result<FpState> {
    let j = state.iteration + 1;
    let policy = br.best_response(model, &state.mu_bar)?;
    let flow = density.flow(model, &policy, j)?;
    state.mu_bar = mix_flows(&state.mu_bar, &flow, j)?;
    state.pi_bar = average_policy_update(&mut state.averager, &flow, &policy)?;
    state.last_br = policy;
    state.last_flow = flow;
    state.iteration = j;
    Ok(state)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub phi: f64,
    pub phi_raw: f64,
    /// Gain of the learned best response, when logged.
    pub proxy: Option<f64>,
    /// Seconds since the start of the run.
    pub wallclock_s: f64,
}

#[derive(Clone, Debug)]
pub struct FpResult {
    pub pi_bar: PolicyFlow,
    pub mu_bar: DistributionFlow,
    pub last_br: PolicyFlow,
    pub trace: Vec<TracePoint>,
    pub snapshots: Vec<(usize, DistributionFlow)>,
    /// Seconds spent in each iteration, evaluation excluded.
    pub iteration_seconds: Vec<f64>,
    /// `μ^{π^j}` for `j = 1..`, when `keep_flows` is set.
    pub flows: Vec<DistributionFlow>,
    pub config: FpConfig,
    pub br_backend: &'static str,
    pub density_backend: &'static str,
}

impl FpResult {
    pub fn phi_trace(&self) -> Vec<(usize, f64)> {
        self.trace.iter().map(|t| (t.iteration, t.phi)).collect()
    }

    pub fn phi_at(&self, j: usize) -> Option<f64> {
        self.trace.iter().find(|t| t.iteration == j).map(|t| t.phi)
    }
}

/// Stepwise driver; partial results stay available after a failure.
pub struct FpRunner<'m> {
    model: &'m FiniteMFG,
    config: FpConfig,
    br: Box<dyn BestResponder + 'm>,
    density: Box<dyn DensityEstimator + 'm>,
    state: FpState,
    trace: Vec<TracePoint>,
    snapshots: Vec<(usize, DistributionFlow)>,
    iteration_seconds: Vec<f64>,
    flows: Vec<DistributionFlow>,
    start: Instant,
}

impl<'m> FpRunner<'m> {
    pub fn new(model: &'m FiniteMFG, config: FpConfig) -> Result<Self> {
        Self::with_initial_policy(model, config, PolicyFlow::uniform(model))
    }

    pub fn with_initial_policy(
        model: &'m FiniteMFG,
        config: FpConfig,
        pi0: PolicyFlow,
    ) -> Result<Self> {
        config.check(model)?;
        let start = Instant::now();
        let br: Box<dyn BestResponder> = match &config.br {
            BrBackend::Exact => Box::new(ExactBr),
            BrBackend::QLearning { q, warm_start } => {
                let q = QLearningConfig {
                    seed: config.seed,
                    ..q.clone()
                };
                Box::new(QLearningBr::new(model, q, *warm_start)?)
            }
        };
        let mut density: Box<dyn DensityEstimator> = match config.density {
            DensityBackend::Exact => Box::new(ExactDensity),
            DensityBackend::Empirical { episodes } => Box::new(EmpiricalDensity {
                episodes,
                seed: config.seed,
            }),
        };
        let state = FpState::new(model, pi0, density.as_mut(), config.seed)?;
        let mut runner = Self {
            model,
            config,
            br,
            density,
            state,
            trace: Vec::new(),
            snapshots: Vec::new(),
            iteration_seconds: Vec::new(),
            flows: Vec::new(),
            start,
        };
        runner.evaluate()?;
        Ok(runner)
    }

    pub fn state(&self) -> &FpState {
        &self.state
    }

    pub fn trace(&self) -> &[TracePoint] {
        &self.trace
    }

    pub fn is_done(&self) -> bool {
        self.state.iteration >= self.config.iterations
    }

    fn evaluate(&mut self) -> Result<()> {
        let j = self.state.iteration;
        let report = exploitability(self.model, &self.state.pi_bar)?;
        let proxy = if self.config.log_proxy && j > 0 {
            Some(deviation_gain(self.model, &self.state.pi_bar, &self.state.last_br)?.phi_raw)
        } else {
            None
        };
        self.trace.push(TracePoint {
            iteration: j,
            phi: report.phi,
            phi_raw: report.phi_raw,
            proxy,
            wallclock_s: self.start.elapsed().as_secs_f64(),
        });
        Ok(())
    }

    /// Runs one iteration (and its evaluation, when due).
    pub fn step(&mut self) -> Result<()> {
        let t = Instant::now();
        let state = self.state.clone();
        self.state = fp_step(state, self.model, self.br.as_mut(), self.density.as_mut())?;
        self.iteration_seconds.push(t.elapsed().as_secs_f64());
        let j = self.state.iteration;
        if self.config.keep_flows {
            self.flows.push(self.state.last_flow.clone());
        }
        if self.config.snapshot_at(j) {
            self.snapshots.push((j, self.state.mu_bar.clone()));
        }
        if self.config.evaluate_at(j) {
            self.evaluate()?;
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<FpResult> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(self.finish())
    }

    /// Result so far; usable after a failed step.
    pub fn finish(self) -> FpResult {
        FpResult {
            br_backend: self.br.name(),
            density_backend: self.density.name(),
            pi_bar: self.state.pi_bar,
            mu_bar: self.state.mu_bar,
            last_br: self.state.last_br,
            trace: self.trace,
            snapshots: self.snapshots,
            iteration_seconds: self.iteration_seconds,
            flows: self.flows,
            config: self.config,
        }
    }
}

/// Runs `config.iterations` steps from the uniform policy.
pub fn run_fp(model: &FiniteMFG, config: &FpConfig) -> Result<FpResult> {
    FpRunner::new(model, config.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FlowKind;

    #[test]
    fn geometric_cadence() {
        let got: Vec<usize> = (0..=1000).filter(|&j| is_geometric(j)).collect();
        assert_eq!(got, vec![1, 2, 5, 10, 20, 50, 100, 200, 500, 1000]);
    }

    #[test]
    fn averager_weights_by_mass() {
        let mut avg = PolicyAverager::new(1, 1, 2);
        let f1 = DistributionFlow::from_slices(FlowKind::Finite, vec![vec![0.2]]).unwrap();
        let f2 = DistributionFlow::from_slices(FlowKind::Finite, vec![vec![0.8]]).unwrap();
        let left = PolicyFlow::from_raw(1, 1, 2, vec![1.0, 0.0]).unwrap();
        let right = PolicyFlow::from_raw(1, 1, 2, vec![0.0, 1.0]).unwrap();
        average_policy_update(&mut avg, &f1, &left).unwrap();
        let p = average_policy_update(&mut avg, &f2, &right).unwrap();
        assert!((p.row(0, 0)[0] - 0.2).abs() < 1e-15);
        assert!((p.row(0, 0)[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_mass_term_drops_and_empty_rows_are_uniform() {
        let mut avg = PolicyAverager::new(1, 2, 2);
        let f1 = DistributionFlow::from_slices(FlowKind::Finite, vec![vec![1.0, 0.0]]).unwrap();
        let f2 = DistributionFlow::from_slices(FlowKind::Finite, vec![vec![0.0, 0.0]]).unwrap();
        let p1 = PolicyFlow::from_raw(1, 2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let p2 = PolicyFlow::from_raw(1, 2, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        average_policy_update(&mut avg, &f1, &p1).unwrap();
        let p = average_policy_update(&mut avg, &f2, &p2).unwrap();
        assert_eq!(p.row(0, 0), &[0.0, 1.0]);
        assert_eq!(p.row(0, 1), &[0.5, 0.5]);
    }
}
