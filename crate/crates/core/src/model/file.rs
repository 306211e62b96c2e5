//! JSON model descriptions.
//!
//! ```json
//! {
//!   "states": 2, "actions": 2, "horizon": 2,
//!   "mu0": [1.0, 0.0],
//!   "transition": [[[0.5, 0.5], [0.0, 1.0]], [[1.0, 0.0], [0.3, 0.7]]],
//!   "noise_tree": {"children": [{"symbol": 0, "prob": 1.0, "children": [...]}]},
//!   "reward": {"builtin": "tabular",
//!              "params": {"values": [[0, 1], [1, 0]], "crowd": {"kind": "neg_log", "weight": 1}}}
//! }
//! ```
//!
//! `transition` is a dense `[x][a][x']` array, a per-symbol `[ξ][x][a][x']`
//! array, or `{"builtin": <environment>, "params": {...}}`. A builtin
//! environment supplies both dynamics and reward, so `reward` must then name
//! the same environment.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    CrowdTerm, Dynamics, FiniteMFG, Kernel, Mode, NoiseNodeSpec, NoiseTree, TabularReward,
};
use crate::environments;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetDescription {
    Count(usize),
    Labels(Vec<String>),
}

impl SetDescription {
    fn len(&self) -> usize {
        match self {
            SetDescription::Count(n) => *n,
            SetDescription::Labels(l) => l.len(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransitionDescription {
    Dense(Vec<Vec<Vec<f64>>>),
    PerSymbol(Vec<Vec<Vec<Vec<f64>>>>),
    Builtin {
        builtin: String,
        #[serde(default)]
        params: Value,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RewardDescription {
    pub builtin: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescription {
    #[serde(default)]
    pub name: Option<String>,
    pub states: SetDescription,
    pub actions: SetDescription,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub discount: Option<f64>,
    #[serde(default)]
    pub mu0: Option<Vec<f64>>,
    pub transition: TransitionDescription,
    #[serde(default)]
    pub noise_tree: Option<NoiseNodeSpec>,
    pub reward: RewardDescription,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TabularParams {
    values: Value,
    #[serde(default = "no_crowd")]
    crowd: CrowdTerm,
}

fn no_crowd() -> CrowdTerm {
    CrowdTerm::None
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FiniteMFG> {
    let text = std::fs::read_to_string(path)?;
    model_from_str(&text)
}

pub fn model_from_str(text: &str) -> Result<FiniteMFG> {
    let desc: ModelDescription = serde_json::from_str(text)?;
    desc.build()
}

impl ModelDescription {
    pub fn mode(&self) -> Result<Mode> {
        match (self.horizon, self.discount) {
            (Some(horizon), None) => Ok(Mode::Finite { horizon }),
            (None, Some(gamma)) => Ok(Mode::Discounted { gamma }),
            _ => Err(Error::InvalidModel(
                "exactly one of `horizon` and `discount` must be set".into(),
            )),
        }
    }

    pub fn build(&self) -> Result<FiniteMFG> {
        let mode = self.mode()?;
        let (ns, na) = (self.states.len(), self.actions.len());
        let name = self.name.clone().unwrap_or_else(|| "custom".into());

        if let TransitionDescription::Builtin { builtin, params } = &self.transition {
            if &self.reward.builtin != builtin {
                return Err(Error::InvalidModel(format!(
                    "builtin transition `{builtin}` needs reward builtin `{builtin}`, got `{}`",
                    self.reward.builtin
                )));
            }
            let model = environments::build_env(builtin, params)?;
            if model.num_states() != ns || model.num_actions() != na || model.mode() != mode {
                return Err(Error::InvalidModel(format!(
                    "builtin `{builtin}` has {} states, {} actions and mode {:?}; \
                     the description says {ns}, {na}, {mode:?}",
                    model.num_states(),
                    model.num_actions(),
                    model.mode()
                )));
            }
            return Ok(match &self.mu0 {
                Some(mu0) => model.with_mu0(mu0.clone()),
                None => model,
            });
        }

        let kernels = match &self.transition {
            TransitionDescription::Dense(t) => vec![dense_kernel(t, ns, na)?],
            TransitionDescription::PerSymbol(ts) => ts
                .iter()
                .map(|t| dense_kernel(t, ns, na))
                .collect::<Result<_>>()?,
            TransitionDescription::Builtin { .. } => unreachable!(),
        };
        if self.reward.builtin != "tabular" {
            return Err(Error::InvalidModel(format!(
                "reward builtin `{}` needs a builtin transition; dense transitions take \
                 the `tabular` reward",
                self.reward.builtin
            )));
        }
        let params: TabularParams = serde_json::from_value(self.reward.params.clone())?;
        let tables = if let Ok(t) = serde_json::from_value::<Vec<Vec<f64>>>(params.values.clone())
        {
            vec![t]
        } else {
            serde_json::from_value::<Vec<Vec<Vec<f64>>>>(params.values)?
        };
        for t in &tables {
            if t.len() != ns || t.iter().any(|row| row.len() != na) {
                return Err(Error::InvalidModel(format!(
                    "reward table must be {ns} x {na}"
                )));
            }
        }
        let mu0 = self
            .mu0
            .clone()
            .ok_or_else(|| Error::InvalidModel("`mu0` is required".into()))?;
        let tree = self.noise_tree.as_ref().map(NoiseTree::from_spec);
        Ok(FiniteMFG::new(
            name,
            ns,
            na,
            mode,
            mu0,
            tree,
            Dynamics::Fixed(kernels),
            Arc::new(TabularReward::per_symbol(tables, params.crowd)),
        ))
    }
}

fn dense_kernel(t: &[Vec<Vec<f64>>], ns: usize, na: usize) -> Result<Kernel> {
    if t.len() != ns || t.iter().any(|r| r.len() != na || r.iter().any(|p| p.len() != ns)) {
        return Err(Error::InvalidModel(format!(
            "dense transition must be {ns} x {na} x {ns}"
        )));
    }
    Ok(Kernel::from_dense(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_mfg;

    const TWO_STATE: &str = r#"{
        "states": 2, "actions": 2, "horizon": 2,
        "mu0": [1.0, 0.0],
        "transition": [[[0.5, 0.5], [0.0, 1.0]], [[1.0, 0.0], [0.3, 0.7]]],
        "reward": {"builtin": "tabular",
                   "params": {"values": [[0, 1], [1, 0]],
                              "crowd": {"kind": "neg_log", "weight": 1.0}}}
    }"#;

    #[test]
    fn dense_model_loads_and_validates() {
        let m = model_from_str(TWO_STATE).unwrap();
        assert_eq!(m.num_states(), 2);
        assert_eq!(m.tree().depth(), 3);
        assert!(validate_mfg(&m).is_valid());
    }

    #[test]
    fn noise_tree_is_read_in_order() {
        let text = TWO_STATE.replace(
            r#""mu0""#,
            r#""noise_tree": {"children": [
                {"symbol": 0, "prob": 0.5, "children": [{"children": [{"children": []}]}]},
                {"symbol": 1, "prob": 0.5, "children": [{"children": [{"children": []}]}]}
            ]}, "mu0""#,
        );
        let m = model_from_str(&text).unwrap();
        assert_eq!(m.tree().enumerate_scenarios(3).unwrap().len(), 2);
        assert!(validate_mfg(&m).is_valid(), "{}", validate_mfg(&m));
    }

    #[test]
    fn both_modes_is_rejected() {
        let text = TWO_STATE.replace(r#""horizon": 2"#, r#""horizon": 2, "discount": 0.9"#);
        assert!(matches!(model_from_str(&text), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn builtin_environment_is_accepted() {
        let text = r#"{
            "states": 10, "actions": 3, "horizon": 4,
            "transition": {"builtin": "beach_bar", "params": {"num_states": 10, "horizon": 4}},
            "reward": {"builtin": "beach_bar"}
        }"#;
        let m = model_from_str(text).unwrap();
        assert_eq!(m.num_states(), 10);
        assert!(validate_mfg(&m).is_valid());
    }
}
