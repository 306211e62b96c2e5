//! Builtin games and the name registry.

pub mod beach_bar;
pub mod lq;
pub mod maze;

use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use beach_bar::{build_beach_bar, BeachBarParams, Closure, Proximity};
pub use lq::{build_lq, build_lq_cn, lq_exact_policy, lq_riccati_eta, LqParams};
pub use maze::{build_maze, build_maze2d, Maze, MazeParams};

use crate::error::{Error, Result};
use crate::model::FiniteMFG;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    Lq,
    LqCn,
    BeachBar,
    BeachBarCn1,
    BeachBarCn2,
    BeachBarGamma,
    Maze2d,
}

impl EnvName {
    pub const ALL: [EnvName; 7] = [
        EnvName::Lq,
        EnvName::LqCn,
        EnvName::BeachBar,
        EnvName::BeachBarCn1,
        EnvName::BeachBarCn2,
        EnvName::BeachBarGamma,
        EnvName::Maze2d,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::Lq => "lq",
            EnvName::LqCn => "lq_cn",
            EnvName::BeachBar => "beach_bar",
            EnvName::BeachBarCn1 => "beach_bar_cn1",
            EnvName::BeachBarCn2 => "beach_bar_cn2",
            EnvName::BeachBarGamma => "beach_bar_gamma",
            EnvName::Maze2d => "maze2d",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            EnvName::Lq => "linear-quadratic mean reversion on a 1-D grid",
            EnvName::LqCn => "linear-quadratic game with a correlated common noise (product tree)",
            EnvName::BeachBar => "beach bar on a torus with crowd aversion",
            EnvName::BeachBarCn1 => "beach bar that may close at one step",
            EnvName::BeachBarCn2 => "beach bar that may close at any step of the first half",
            EnvName::BeachBarGamma => "discounted beach bar",
            EnvName::Maze2d => "crowd heading to the centre of a 2-D maze",
        }
    }

    /// Default parameters as JSON.
    pub fn defaults(self) -> Value {
        let v = match self {
            EnvName::Lq => serde_json::to_value(LqParams::default()),
            EnvName::LqCn => serde_json::to_value(LqParams::common_noise()),
            EnvName::BeachBar => serde_json::to_value(BeachBarParams::default()),
            EnvName::BeachBarCn1 => serde_json::to_value(BeachBarParams::one_closure()),
            EnvName::BeachBarCn2 => serde_json::to_value(BeachBarParams::closure_window()),
            EnvName::BeachBarGamma => serde_json::to_value(BeachBarParams::discounted()),
            EnvName::Maze2d => serde_json::to_value(MazeParams::default()),
        };
        v.expect("parameter structs serialize")
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvName::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = EnvName::ALL.iter().map(|e| e.as_str()).collect();
                Error::InvalidParameter(format!(
                    "unknown environment `{s}`; known: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Overlays `overrides` (an object, or null) on the registry defaults.
pub fn merged_params<T: DeserializeOwned>(name: EnvName, overrides: &Value) -> Result<T> {
    let mut base = name.defaults();
    match (overrides, &mut base) {
        (Value::Null, _) => {}
        (Value::Object(o), Value::Object(b)) => {
            for (k, v) in o {
                b.insert(k.clone(), v.clone());
            }
        }
        _ => {
            return Err(Error::InvalidParameter(
                "environment parameters must be a JSON object".into(),
            ))
        }
    }
    serde_json::from_value(base)
        .map_err(|e| Error::InvalidParameter(format!("{name} parameters: {e}")))
}

/// Builds a registry environment; `params` overrides its defaults.
pub fn build_env(name: &str, params: &Value) -> Result<FiniteMFG> {
    let env: EnvName = name.parse()?;
    match env {
        EnvName::Lq => build_lq(&merged_params(env, params)?),
        EnvName::LqCn => build_lq_cn(&merged_params(env, params)?),
        EnvName::BeachBar
        | EnvName::BeachBarCn1
        | EnvName::BeachBarCn2
        | EnvName::BeachBarGamma => build_beach_bar(&merged_params(env, params)?),
        EnvName::Maze2d => build_maze2d(&merged_params(env, params)?),
    }
}
