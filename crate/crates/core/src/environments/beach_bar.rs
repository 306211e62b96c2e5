//! The beach bar process: a torus of positions with a bar players want to be
//! near, and a crowd-aversion term `-log μ(x)`.
//!
//! Actions are `0 = left`, `1 = still`, `2 = right`. Symbol `0` is the open
//! bar, symbol `1` the closed bar (no proximity reward).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CrowdTerm, Dynamics, FiniteMFG, Kernel, Mode, NoiseTree, TabularReward};

pub const OPEN: u32 = 0;
pub const CLOSED: u32 = 1;

/// How the bar may close.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Closure {
    None,
    /// The bar closes at `step` with probability `prob`.
    AtStep { step: usize, prob: f64 },
    /// At each step before `until` an open bar closes with probability
    /// `prob`, and stays closed.
    Window { until: usize, prob: f64 },
}

/// Proximity reward `r̃` as a function of the torus distance to the bar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proximity {
    /// `1 - d / |X|`.
    Linear,
    /// `exp(-d / scale)`.
    Exponential { scale: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeachBarParams {
    pub num_states: usize,
    /// Bar position; the middle of the beach when absent.
    pub bar: Option<usize>,
    pub horizon: usize,
    /// Switches to the discounted game when set.
    pub gamma: Option<f64>,
    pub p_stay: f64,
    pub closure: Closure,
    pub proximity: Proximity,
    pub crowd_weight: f64,
}

impl Default for BeachBarParams {
    fn default() -> Self {
        Self {
            num_states: 100,
            bar: None,
            horizon: 15,
            gamma: None,
            p_stay: 0.5,
            closure: Closure::None,
            proximity: Proximity::Linear,
            crowd_weight: 1.0,
        }
    }
}

impl BeachBarParams {
    /// Closure at `N/2` of `N = 30` with probability one half.
    pub fn one_closure() -> Self {
        Self {
            horizon: 30,
            closure: Closure::AtStep { step: 15, prob: 0.5 },
            ..Self::default()
        }
    }

    /// Closure possible at every step of the first half of `N = 30`.
    pub fn closure_window() -> Self {
        Self {
            horizon: 30,
            closure: Closure::Window { until: 15, prob: 0.1 },
            ..Self::default()
        }
    }

    pub fn discounted() -> Self {
        Self {
            gamma: Some(0.9),
            ..Self::default()
        }
    }

    pub fn bar_position(&self) -> usize {
        self.bar.unwrap_or(self.num_states / 2)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.num_states == 0 {
            return bad("the beach needs at least one state".into());
        }
        if self.bar_position() >= self.num_states {
            return bad(format!("bar position {} is off the beach", self.bar_position()));
        }
        if !(0.0..=1.0).contains(&self.p_stay) {
            return bad(format!("p_stay {} is outside [0, 1]", self.p_stay));
        }
        match self.closure {
            Closure::AtStep { step, prob } => {
                if step > self.horizon || !(0.0..=1.0).contains(&prob) {
                    return bad(format!("closure at step {step} with probability {prob}"));
                }
            }
            Closure::Window { until, prob } => {
                if until > self.horizon || !(0.0..=1.0).contains(&prob) {
                    return bad(format!("closure window until {until} with probability {prob}"));
                }
            }
            Closure::None => {}
        }
        if self.gamma.is_some() && self.closure != Closure::None {
            return bad("the discounted beach bar has no closure".into());
        }
        Ok(())
    }

    fn distance(&self, x: usize) -> usize {
        let d = x.abs_diff(self.bar_position());
        d.min(self.num_states - d)
    }

    /// `r̃(x)`.
    pub fn proximity_reward(&self, x: usize) -> f64 {
        let d = self.distance(x) as f64;
        match self.proximity {
            Proximity::Linear => 1.0 - d / self.num_states as f64,
            Proximity::Exponential { scale } => (-d / scale).exp(),
        }
    }
}

fn tree(p: &BeachBarParams) -> NoiseTree {
    let n = p.horizon;
    let closure = p.closure.clone();
    NoiseTree::build(n + 1, usize::MAX, move |path| {
        let depth = path.len();
        let closed = path.last() == Some(&CLOSED);
        if closed {
            return vec![(CLOSED, 1.0)];
        }
        match closure {
            Closure::AtStep { step, prob } if depth == step => {
                vec![(OPEN, 1.0 - prob), (CLOSED, prob)]
            }
            Closure::Window { until, prob } if depth < until => {
                vec![(OPEN, 1.0 - prob), (CLOSED, prob)]
            }
            _ => vec![(OPEN, 1.0)],
        }
    })
    .expect("no node limit")
}

/// Torus walk with drift `b(a) ∈ {-1, 0, 1}` and noise `ε ∈ {-1, 0, 1}`.
pub fn beach_kernel(num_states: usize, p_stay: f64) -> Kernel {
    let s = num_states as i64;
    let side = (1.0 - p_stay) / 2.0;
    Kernel::from_fn(num_states, 3, |x, a, row| {
        let b = a as i64 - 1;
        for (e, w) in [(-1i64, side), (0, p_stay), (1, side)] {
            let y = (x as i64 + b + e).rem_euclid(s);
            row.push((y as usize, w));
        }
    })
}

pub fn build_beach_bar(params: &BeachBarParams) -> Result<FiniteMFG> {
    params.check()?;
    let ns = params.num_states;
    let cost = |a: usize| (a as f64 - 1.0).abs() / ns as f64;
    let open: Vec<Vec<f64>> = (0..ns)
        .map(|x| (0..3).map(|a| params.proximity_reward(x) - cost(a)).collect())
        .collect();
    let closed: Vec<Vec<f64>> = (0..ns).map(|_| (0..3).map(|a| -cost(a)).collect()).collect();
    let reward = TabularReward::per_symbol(
        vec![open, closed],
        CrowdTerm::NegLog {
            weight: params.crowd_weight,
        },
    );
    let (mode, tree, name) = match params.gamma {
        Some(gamma) => (Mode::Discounted { gamma }, None, "beach_bar_gamma"),
        None => (
            Mode::Finite {
                horizon: params.horizon,
            },
            Some(tree(params)),
            match params.closure {
                Closure::None => "beach_bar",
                Closure::AtStep { .. } => "beach_bar_cn1",
                Closure::Window { .. } => "beach_bar_cn2",
            },
        ),
    };
    Ok(FiniteMFG::new(
        name,
        ns,
        3,
        mode,
        vec![1.0 / ns as f64; ns],
        tree,
        Dynamics::Fixed(vec![beach_kernel(ns, params.p_stay)]),
        Arc::new(reward),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_mfg;

    #[test]
    fn registry_settings_validate() {
        for p in [
            BeachBarParams::default(),
            BeachBarParams::one_closure(),
            BeachBarParams::closure_window(),
            BeachBarParams::discounted(),
        ] {
            let m = build_beach_bar(&p).unwrap();
            let r = validate_mfg(&m);
            assert!(r.is_valid(), "{r}");
        }
    }

    #[test]
    fn one_closure_has_two_scenarios() {
        let m = build_beach_bar(&BeachBarParams::one_closure()).unwrap();
        let s = m.tree().enumerate_scenarios(16).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].1, s[1].1), (0.5, 0.5));
        assert_eq!(m.tree().enumerate_scenarios(15).unwrap().len(), 1);
    }

    #[test]
    fn window_has_half_horizon_plus_one_leaves() {
        let m = build_beach_bar(&BeachBarParams::closure_window()).unwrap();
        assert_eq!(m.tree().enumerate_scenarios(31).unwrap().len(), 16);
        assert_eq!(m.tree().enumerate_scenarios(16).unwrap().len(), 16);
    }

    #[test]
    fn closed_reward_at_bar() {
        let m = build_beach_bar(&BeachBarParams::one_closure()).unwrap();
        let mu = vec![0.01; 100];
        let r = m.reward_table(CLOSED, &mu);
        let bar = 50;
        assert!((r[bar * 3 + 1] - (-(0.01f64).ln())).abs() < 1e-12);
        let open = m.reward_table(OPEN, &mu);
        assert!((open[bar * 3 + 1] - (1.0 - (0.01f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_doubly_stochastic() {
        let k = beach_kernel(7, 0.3);
        let mut col = [0.0; 7];
        for x in 0..7 {
            let (t, w) = k.row(x, 1);
            for (&y, &p) in t.iter().zip(w) {
                col[y as usize] += p;
            }
        }
        for c in col {
            assert!((c - 1.0).abs() < 1e-12);
        }
    }
}
