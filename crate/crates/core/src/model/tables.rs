//! Slot-indexed tables: policies, distributions, action values.
//!
//! Every table is a sequence of slices, one per `(step, tree node)` slot of a
//! model (see [`FiniteMFG::num_slots`]). Slices are flat and row-major.

use std::io::Write;

use super::FiniteMFG;
use crate::error::{Error, Result};

/// Stochastic policy `π_n(a | x, node)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyFlow {
    num_states: usize,
    num_actions: usize,
    num_slots: usize,
    probs: Vec<f64>,
}

impl PolicyFlow {
    pub fn uniform(model: &FiniteMFG) -> Self {
        Self::uniform_with(model.num_slots(), model.num_states(), model.num_actions())
    }

    pub fn uniform_with(num_slots: usize, num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Self {
            num_states,
            num_actions,
            num_slots,
            probs: vec![p; num_slots * num_states * num_actions],
        }
    }

    /// Deterministic policy from `action(slot, x)`.
    pub fn deterministic(
        model: &FiniteMFG,
        mut action: impl FnMut(usize, usize) -> usize,
    ) -> Self {
        let (ns, na, slots) = (model.num_states(), model.num_actions(), model.num_slots());
        let mut probs = vec![0.0; slots * ns * na];
        for s in 0..slots {
            for x in 0..ns {
                probs[(s * ns + x) * na + action(s, x)] = 1.0;
            }
        }
        Self {
            num_states: ns,
            num_actions: na,
            num_slots: slots,
            probs,
        }
    }

    pub fn from_raw(
        num_slots: usize,
        num_states: usize,
        num_actions: usize,
        probs: Vec<f64>,
    ) -> Result<Self> {
        if probs.len() != num_slots * num_states * num_actions {
            return Err(Error::ShapeMismatch(format!(
                "policy data has {} entries, expected {}",
                probs.len(),
                num_slots * num_states * num_actions
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            num_slots,
            probs,
        })
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn slice(&self, slot: usize) -> &[f64] {
        let w = self.num_states * self.num_actions;
        &self.probs[slot * w..(slot + 1) * w]
    }

    pub fn slice_mut(&mut self, slot: usize) -> &mut [f64] {
        let w = self.num_states * self.num_actions;
        &mut self.probs[slot * w..(slot + 1) * w]
    }

    pub fn row(&self, slot: usize, x: usize) -> &[f64] {
        let start = (slot * self.num_states + x) * self.num_actions;
        &self.probs[start..start + self.num_actions]
    }

    pub fn row_mut(&mut self, slot: usize, x: usize) -> &mut [f64] {
        let start = (slot * self.num_states + x) * self.num_actions;
        &mut self.probs[start..start + self.num_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Action with probability one, if the row is deterministic.
    pub fn action_of(&self, slot: usize, x: usize) -> Option<usize> {
        let row = self.row(slot, x);
        row.iter().position(|&p| p == 1.0)
    }

    pub fn matches(&self, model: &FiniteMFG) -> Result<()> {
        if self.num_slots != model.num_slots()
            || self.num_states != model.num_states()
            || self.num_actions != model.num_actions()
        {
            return Err(Error::ShapeMismatch(format!(
                "policy shape (slots {}, states {}, actions {}) does not match model \
                 (slots {}, states {}, actions {})",
                self.num_slots,
                self.num_states,
                self.num_actions,
                model.num_slots(),
                model.num_states(),
                model.num_actions()
            )));
        }
        Ok(())
    }

    /// Rejects rows with NaN, negative entries, or a sum off one by more
    /// than `1e-12`. Rows are never repaired.
    pub fn check_normalized(&self) -> Result<()> {
        for s in 0..self.num_slots {
            for x in 0..self.num_states {
                let row = self.row(s, x);
                let sum: f64 = row.iter().sum();
                if row.iter().any(|p| !(*p >= 0.0)) || !((sum - 1.0).abs() <= 1e-12) {
                    return Err(Error::InvalidPolicy(format!(
                        "row (slot {s}, state {x}) is not a distribution: {row:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Whether a flow holds per-step distributions or a discounted occupancy measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowKind {
    Finite,
    Occupancy { gamma: f64 },
}

/// Population distributions `μ_n(x | node)`, or the γ-occupancy measure.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionFlow {
    num_states: usize,
    num_slots: usize,
    kind: FlowKind,
    mass: Vec<f64>,
    estimated: Vec<bool>,
}

impl DistributionFlow {
    pub fn zeros(num_slots: usize, num_states: usize, kind: FlowKind) -> Self {
        Self {
            num_states,
            num_slots,
            kind,
            mass: vec![0.0; num_slots * num_states],
            estimated: vec![true; num_slots],
        }
    }

    pub fn zeros_for(model: &FiniteMFG) -> Self {
        let kind = match model.gamma() {
            Some(gamma) => FlowKind::Occupancy { gamma },
            None => FlowKind::Finite,
        };
        Self::zeros(model.num_slots(), model.num_states(), kind)
    }

    pub fn from_slices(kind: FlowKind, slices: Vec<Vec<f64>>) -> Result<Self> {
        let num_slots = slices.len();
        let num_states = slices.first().map_or(0, Vec::len);
        if slices.iter().any(|s| s.len() != num_states) {
            return Err(Error::ShapeMismatch("ragged distribution slices".into()));
        }
        Ok(Self {
            num_states,
            num_slots,
            kind,
            mass: slices.into_iter().flatten().collect(),
            estimated: vec![true; num_slots],
        })
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn kind(&self) -> FlowKind {
        self.kind
    }

    pub fn slice(&self, slot: usize) -> &[f64] {
        &self.mass[slot * self.num_states..(slot + 1) * self.num_states]
    }

    pub fn slice_mut(&mut self, slot: usize) -> &mut [f64] {
        &mut self.mass[slot * self.num_states..(slot + 1) * self.num_states]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mass
    }

    /// False for slices that sampling never reached.
    pub fn is_estimated(&self, slot: usize) -> bool {
        self.estimated[slot]
    }

    pub fn set_estimated(&mut self, slot: usize, estimated: bool) {
        self.estimated[slot] = estimated;
    }

    pub fn unestimated_slots(&self) -> Vec<usize> {
        (0..self.num_slots).filter(|&s| !self.estimated[s]).collect()
    }

    pub fn total(&self, slot: usize) -> f64 {
        self.slice(slot).iter().sum()
    }

    /// Expected total mass per slice: one, or `1 / (1 - γ)`.
    pub fn expected_total(&self) -> f64 {
        match self.kind {
            FlowKind::Finite => 1.0,
            FlowKind::Occupancy { gamma } => 1.0 / (1.0 - gamma),
        }
    }

    /// Slice rescaled to a probability vector (occupancy measures are
    /// multiplied by `1 - γ`); this is what rewards read as the mean field.
    pub fn distribution(&self, slot: usize) -> Vec<f64> {
        match self.kind {
            FlowKind::Finite => self.slice(slot).to_vec(),
            FlowKind::Occupancy { gamma } => {
                self.slice(slot).iter().map(|m| m * (1.0 - gamma)).collect()
            }
        }
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.num_slots != other.num_slots
            || self.num_states != other.num_states
            || self.kind != other.kind
        {
            return Err(Error::ShapeMismatch(format!(
                "flows differ in shape: ({}, {}, {:?}) vs ({}, {}, {:?})",
                self.num_slots, self.num_states, self.kind, other.num_slots, other.num_states,
                other.kind
            )));
        }
        Ok(())
    }

    pub fn matches(&self, model: &FiniteMFG) -> Result<()> {
        if self.num_slots != model.num_slots() || self.num_states != model.num_states() {
            return Err(Error::ShapeMismatch(format!(
                "flow shape (slots {}, states {}) does not match model (slots {}, states {})",
                self.num_slots,
                self.num_states,
                model.num_slots(),
                model.num_states()
            )));
        }
        Ok(())
    }

    /// Largest `|Σ_x μ(x) - expected|` over estimated slices.
    pub fn max_mass_error(&self) -> f64 {
        let want = self.expected_total();
        (0..self.num_slots)
            .filter(|&s| self.estimated[s])
            .map(|s| (self.total(s) - want).abs())
            .fold(0.0, f64::max)
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Total-variation distance of one slice.
    pub fn tv_distance(&self, other: &Self, slot: usize) -> f64 {
        0.5 * self
            .slice(slot)
            .iter()
            .zip(other.slice(slot))
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// CSV with header `n,node_id,state,mass`.
    pub fn write_csv<W: Write>(&self, model: &FiniteMFG, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,node_id,state,mass")?;
        for s in 0..self.num_slots {
            let (n, node) = slot_labels(model, s);
            for (x, m) in self.slice(s).iter().enumerate() {
                writeln!(w, "{n},{node},{x},{m}")?;
            }
        }
        Ok(())
    }
}

fn slot_labels(model: &FiniteMFG, slot: usize) -> (usize, usize) {
    if model.is_discounted() {
        (0, 0)
    } else {
        (model.slot_step(slot), model.tree().dfs_id(slot))
    }
}

/// Action values `Q_n(x, a | node)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    num_slots: usize,
    q: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_slots: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            num_slots,
            q: vec![0.0; num_slots * num_states * num_actions],
        }
    }

    pub fn zeros_for(model: &FiniteMFG) -> Self {
        Self::zeros(model.num_slots(), model.num_states(), model.num_actions())
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn slice(&self, slot: usize) -> &[f64] {
        let w = self.num_states * self.num_actions;
        &self.q[slot * w..(slot + 1) * w]
    }

    pub fn slice_mut(&mut self, slot: usize) -> &mut [f64] {
        let w = self.num_states * self.num_actions;
        &mut self.q[slot * w..(slot + 1) * w]
    }

    pub fn row(&self, slot: usize, x: usize) -> &[f64] {
        let start = (slot * self.num_states + x) * self.num_actions;
        &self.q[start..start + self.num_actions]
    }

    pub fn row_mut(&mut self, slot: usize, x: usize) -> &mut [f64] {
        let start = (slot * self.num_states + x) * self.num_actions;
        &mut self.q[start..start + self.num_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn max_abs(&self) -> f64 {
        self.q.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `V(x) = max_a Q(x, a)`.
    pub fn greedy_values(&self) -> ValueTable {
        let v = self
            .q
            .chunks(self.num_actions)
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        ValueTable {
            num_states: self.num_states,
            num_slots: self.num_slots,
            v,
        }
    }

    /// `V(x) = Σ_a π(a|x) Q(x, a)`.
    pub fn values_under(&self, policy: &PolicyFlow) -> ValueTable {
        let v = self
            .q
            .chunks(self.num_actions)
            .zip(policy.as_slice().chunks(self.num_actions))
            .map(|(q, p)| q.iter().zip(p).map(|(q, p)| q * p).sum())
            .collect();
        ValueTable {
            num_states: self.num_states,
            num_slots: self.num_slots,
            v,
        }
    }

    /// CSV with header `n,node_id,state,action,q`.
    pub fn write_csv<W: Write>(&self, model: &FiniteMFG, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,node_id,state,action,q")?;
        for s in 0..self.num_slots {
            let (n, node) = slot_labels(model, s);
            for x in 0..self.num_states {
                for (a, q) in self.row(s, x).iter().enumerate() {
                    writeln!(w, "{n},{node},{x},{a},{q}")?;
                }
            }
        }
        Ok(())
    }
}

/// State values `V_n(x | node)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    num_states: usize,
    num_slots: usize,
    v: Vec<f64>,
}

impl ValueTable {
    pub fn zeros(num_slots: usize, num_states: usize) -> Self {
        Self {
            num_states,
            num_slots,
            v: vec![0.0; num_slots * num_states],
        }
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn slice(&self, slot: usize) -> &[f64] {
        &self.v[slot * self.num_states..(slot + 1) * self.num_states]
    }

    pub fn slice_mut(&mut self, slot: usize) -> &mut [f64] {
        &mut self.v[slot * self.num_states..(slot + 1) * self.num_states]
    }

    pub fn get(&self, slot: usize, x: usize) -> f64 {
        self.v[slot * self.num_states + x]
    }

    pub fn set(&mut self, slot: usize, x: usize, value: f64) {
        self.v[slot * self.num_states + x] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v
    }
}
