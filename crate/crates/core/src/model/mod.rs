//! The finite mean field game data model.

mod file;
mod kernel;
mod reward;
mod tables;
mod tree;
mod validate;

use std::borrow::Cow;
use std::fmt::Debug;
use std::sync::Arc;

pub use file::{load_model, model_from_str, ModelDescription, RewardDescription, TransitionDescription};
pub use kernel::Kernel;
pub use reward::{
    neg_log_mass, CrowdTerm, MonotoneDecomposition, Reward, TabularReward, LOG_FLOOR,
};
pub use tables::{DistributionFlow, FlowKind, PolicyFlow, QTable, ValueTable};
pub use tree::{NoiseNodeSpec, NoiseTree, Symbol, TreeNode, UNIT_SYMBOL};
pub use validate::{validate_mfg, ValidationReport, Violation};

use crate::error::{Error, Result};

/// Finite horizon `N` (steps `0..=N`) or infinite horizon with discount `γ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Finite { horizon: usize },
    Discounted { gamma: f64 },
}

/// Transition dynamics indexed by noise symbol.
#[derive(Clone, Debug)]
pub enum Dynamics {
    /// One kernel per symbol; symbols past the end reuse the last kernel.
    Fixed(Vec<Kernel>),
    /// Kernels that also read the population distribution of the step.
    MeanField(Arc<dyn MeanFieldDynamics>),
}

/// Dynamics whose kernel depends on the current population distribution.
pub trait MeanFieldDynamics: Send + Sync + Debug {
    fn kernel(&self, symbol: Symbol, mu: &[f64]) -> Kernel;
}

/// A finite-state mean field game. Immutable once built.
#[derive(Clone, Debug)]
pub struct FiniteMFG {
    name: String,
    num_states: usize,
    num_actions: usize,
    mode: Mode,
    mu0: Vec<f64>,
    tree: NoiseTree,
    dynamics: Dynamics,
    reward: Arc<dyn Reward>,
    notes: Vec<String>,
}

impl FiniteMFG {
    #[allow(clippy::too_many_arguments)]
    /// Assembles a model without checking it; see [`validate_mfg`].
    ///
    /// In discounted mode the tree is replaced by a single root.
    pub fn new(
        name: impl Into<String>,
        num_states: usize,
        num_actions: usize,
        mode: Mode,
        mu0: Vec<f64>,
        tree: Option<NoiseTree>,
        dynamics: Dynamics,
        reward: Arc<dyn Reward>,
    ) -> Self {
        let tree = match (mode, tree) {
            (Mode::Discounted { .. }, _) => NoiseTree::degenerate(0),
            (Mode::Finite { .. }, Some(t)) => t,
            (Mode::Finite { horizon }, None) => NoiseTree::degenerate(horizon + 1),
        };
        Self {
            name: name.into(),
            num_states,
            num_actions,
            mode,
            mu0,
            tree,
            dynamics,
            reward,
            notes: Vec::new(),
        }
    }

    /// Attaches a diagnostic that validation reports as a warning.
    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Same game with a different initial distribution.
    pub fn with_mu0(mut self, mu0: Vec<f64>) -> Self {
        self.mu0 = mu0;
        self
    }

    /// Same game on another scenario tree (ignored in discounted mode).
    pub fn with_tree(mut self, tree: NoiseTree) -> Self {
        if !self.is_discounted() {
            self.tree = tree;
        }
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn horizon(&self) -> Option<usize> {
        match self.mode {
            Mode::Finite { horizon } => Some(horizon),
            Mode::Discounted { .. } => None,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.mode {
            Mode::Discounted { gamma } => Some(gamma),
            Mode::Finite { .. } => None,
        }
    }

    pub fn is_discounted(&self) -> bool {
        matches!(self.mode, Mode::Discounted { .. })
    }

    pub fn mu0(&self) -> &[f64] {
        &self.mu0
    }

    pub fn tree(&self) -> &NoiseTree {
        &self.tree
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn reward(&self) -> &dyn Reward {
        self.reward.as_ref()
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    /// Number of `(step, node)` table slices: nodes at depths `0..=N`, or a
    /// single stationary slice in discounted mode. Slice `s` belongs to tree
    /// node `s`.
    pub fn num_slots(&self) -> usize {
        match self.mode {
            Mode::Finite { horizon } => self.tree.num_nodes_through(horizon),
            Mode::Discounted { .. } => 1,
        }
    }

    /// Step index of a slot.
    pub fn slot_step(&self, slot: usize) -> usize {
        self.tree.node(slot).depth
    }

    /// Kernel under `symbol` given the step's population distribution.
    pub fn kernel(&self, symbol: Symbol, mu: &[f64]) -> Cow<'_, Kernel> {
        match &self.dynamics {
            Dynamics::Fixed(ks) => Cow::Borrowed(&ks[(symbol as usize).min(ks.len() - 1)]),
            Dynamics::MeanField(d) => Cow::Owned(d.kernel(symbol, mu)),
        }
    }

    pub fn depends_on_population(&self) -> bool {
        matches!(self.dynamics, Dynamics::MeanField(_))
    }

    /// `r(x, a, mu, symbol)` for every `(x, a)`, flattened as `x * A + a`.
    pub fn reward_table(&self, symbol: Symbol, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_states * self.num_actions];
        self.reward.fill(symbol, mu, &mut out);
        out
    }

    pub(crate) fn require_finite(&self, what: &str) -> Result<usize> {
        self.horizon().ok_or_else(|| {
            Error::ModeMismatch(format!("{what} needs a finite-horizon model"))
        })
    }

    pub(crate) fn require_discounted(&self, what: &str) -> Result<f64> {
        self.gamma().ok_or_else(|| {
            Error::ModeMismatch(format!("{what} needs a discounted model"))
        })
    }
}
