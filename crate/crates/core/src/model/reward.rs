use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use super::tree::Symbol;

/// Floor applied to masses inside `-log μ(x)` crowd terms.
pub const LOG_FLOOR: f64 = 1e-12;

/// `-log(max(m, LOG_FLOOR))`.
#[inline]
pub fn neg_log_mass(m: f64) -> f64 {
    -(m.max(LOG_FLOOR)).ln()
}

/// Reward `r(x, a, μ, ξ)`. Implementations are pure functions of their inputs.
pub trait Reward: Send + Sync + Debug {
    /// Writes `r(x, a, mu, symbol)` into `out[x * num_actions + a]`.
    fn fill(&self, symbol: Symbol, mu: &[f64], out: &mut [f64]);

    /// The monotone split `r = r̃(x, a) + r̄(x, μ)`, when the reward has one.
    fn decomposition(&self) -> Option<&dyn MonotoneDecomposition> {
        None
    }
}

/// Split of a reward into an individual part and a crowd part.
pub trait MonotoneDecomposition: Send + Sync {
    /// `r̃(x, a)` under `symbol`.
    fn individual(&self, symbol: Symbol, x: usize, a: usize) -> f64;
    /// Writes `r̄(x, μ)` into `out[x]`.
    fn crowd(&self, mu: &[f64], out: &mut [f64]);
}

/// Shape of the population-dependent term `r̄(x, μ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CrowdTerm {
    None,
    /// `r̄ = -weight · log μ(x)` (floored).
    NegLog { weight: f64 },
    /// `r̄ = coef · μ(x)`.
    Linear { coef: f64 },
}

impl CrowdTerm {
    #[inline]
    pub fn eval(&self, m: f64) -> f64 {
        match *self {
            CrowdTerm::None => 0.0,
            CrowdTerm::NegLog { weight } => weight * neg_log_mass(m),
            CrowdTerm::Linear { coef } => coef * m,
        }
    }
}

/// Table-driven reward `r̃_ξ(x, a) + r̄(x, μ)`.
///
/// `tables` holds one `[x][a]` table per symbol; a single table serves every
/// symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularReward {
    num_actions: usize,
    tables: Vec<Vec<f64>>,
    crowd: CrowdTerm,
}

impl TabularReward {
    pub fn new(table: Vec<Vec<f64>>, crowd: CrowdTerm) -> Self {
        Self::per_symbol(vec![table], crowd)
    }

    pub fn per_symbol(tables: Vec<Vec<Vec<f64>>>, crowd: CrowdTerm) -> Self {
        let num_actions = tables
            .first()
            .and_then(|t| t.first())
            .map_or(0, Vec::len);
        let tables = tables
            .into_iter()
            .map(|t| t.into_iter().flatten().collect())
            .collect();
        Self {
            num_actions,
            tables,
            crowd,
        }
    }

    fn table(&self, symbol: Symbol) -> &[f64] {
        let i = (symbol as usize).min(self.tables.len() - 1);
        &self.tables[i]
    }

    pub fn crowd_term(&self) -> CrowdTerm {
        self.crowd
    }
}

impl Reward for TabularReward {
    fn fill(&self, symbol: Symbol, mu: &[f64], out: &mut [f64]) {
        let table = self.table(symbol);
        let na = self.num_actions;
        for (x, &m) in mu.iter().enumerate() {
            let c = self.crowd.eval(m);
            for a in 0..na {
                out[x * na + a] = table[x * na + a] + c;
            }
        }
    }

    fn decomposition(&self) -> Option<&dyn MonotoneDecomposition> {
        Some(self)
    }
}

impl MonotoneDecomposition for TabularReward {
    fn individual(&self, symbol: Symbol, x: usize, a: usize) -> f64 {
        self.table(symbol)[x * self.num_actions + a]
    }

    fn crowd(&self, mu: &[f64], out: &mut [f64]) {
        for (o, &m) in out.iter_mut().zip(mu) {
            *o = self.crowd.eval(m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabular_reward_adds_crowd_term() {
        let r = TabularReward::new(
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            CrowdTerm::Linear { coef: -1.0 },
        );
        let mut out = vec![0.0; 4];
        r.fill(0, &[0.25, 0.75], &mut out);
        assert_eq!(out, vec![0.75, 1.75, 2.25, 3.25]);
    }

    #[test]
    fn neg_log_is_floored() {
        assert_eq!(neg_log_mass(0.0), -(1e-12f64).ln());
        assert_eq!(CrowdTerm::NegLog { weight: 0.5 }.eval(1.0), 0.0);
    }

    #[test]
    fn per_symbol_tables_select_by_symbol() {
        let r = TabularReward::per_symbol(
            vec![vec![vec![1.0]], vec![vec![-1.0]]],
            CrowdTerm::None,
        );
        let mut out = [0.0];
        r.fill(1, &[1.0], &mut out);
        assert_eq!(out, [-1.0]);
        // symbols past the last table reuse it
        r.fill(7, &[1.0], &mut out);
        assert_eq!(out, [-1.0]);
    }
}
