use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::best_response::QLearningConfig;
use crate::environments::{build_env, EnvName};
use crate::error::{Error, Result};
use crate::fictitious_play::{BrBackend, DensityBackend, FpConfig};
use crate::model::{validate_mfg, FiniteMFG};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Finite,
    Discounted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendName {
    ModelBased,
    ModelFree,
}

/// One experiment, as read from a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: String,
    #[serde(default)]
    pub env_params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeName>,
    #[serde(default = "model_based")]
    pub backend: BackendName,
    pub iterations: usize,
    #[serde(default = "one")]
    pub eval_every: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Q-learning settings for the model-free backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_learning: Option<QLearningConfig>,
    /// Keep the Q table between iterations (model-free).
    #[serde(default = "yes")]
    pub warm_start: bool,
    /// Simulated players per density estimate (model-free).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_episodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<Vec<usize>>,
    /// Log the learned best response's gain next to the exact metric.
    #[serde(default)]
    pub log_proxy: bool,
    /// Record wall-clock seconds in `exploitability.csv`. Off by default so
    /// that repeated runs produce identical files.
    #[serde(default)]
    pub wallclock: bool,
}

fn model_based() -> BackendName {
    BackendName::ModelBased
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

/// 1-based line of the first occurrence of `"key"`.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn config_error(origin: &str, text: &str, key: &str, msg: impl AsRef<str>) -> Error {
    match key_line(text, key) {
        Some(line) => Error::Config(format!("{origin}:{line}: {}", msg.as_ref())),
        None => Error::Config(format!("{origin}: {}", msg.as_ref())),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and checks a config; errors name the offending line.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column()))
        })?;
        cfg.check(text, origin)?;
        Ok(cfg)
    }

    fn check(&self, text: &str, origin: &str) -> Result<()> {
        let err = |key: &str, msg: String| config_error(origin, text, key, msg);
        if self.iterations == 0 {
            return Err(err("iterations", "iterations must be ≥ 1".into()));
        }
        if self.eval_every == 0 {
            return Err(err("eval_every", "eval_every must be ≥ 1".into()));
        }
        if let Err(e) = self.env.parse::<EnvName>() {
            return Err(err("env", e.to_string()));
        }
        if self.density_episodes == Some(0) {
            return Err(err("density_episodes", "density_episodes must be ≥ 1".into()));
        }
        if let Some(q) = &self.q_learning {
            q.check().map_err(|e| err("q_learning", e.to_string()))?;
        }
        let model = self.build_model().map_err(|e| err("env_params", e.to_string()))?;
        let report = validate_mfg(&model);
        if !report.is_valid() {
            return Err(err("env", format!("model is invalid:\n{report}")));
        }
        match (self.mode, model.is_discounted()) {
            (Some(ModeName::Finite), true) | (Some(ModeName::Discounted), false) => {
                return Err(err(
                    "mode",
                    format!(
                        "mode {:?} does not match environment `{}`",
                        self.mode.unwrap(),
                        self.env
                    ),
                ))
            }
            _ => {}
        }
        if model.is_discounted() && self.backend == BackendName::ModelFree {
            return Err(err(
                "backend",
                "the discounted game supports the model_based backend only".into(),
            ));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<FiniteMFG> {
        build_env(&self.env, &self.env_params)
    }

    /// Output directory: `output_dir`, or `out/<config file stem>`.
    pub fn output_dir_for(&self, config_path: &Path) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| {
            let stem = config_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into());
            Path::new("out").join(stem)
        })
    }

    pub fn fp_config(&self, model: &FiniteMFG) -> FpConfig {
        let mut fp = match self.backend {
            BackendName::ModelBased => FpConfig::model_based(self.iterations),
            BackendName::ModelFree => {
                let episodes = self
                    .density_episodes
                    .unwrap_or(10 * model.num_states());
                let mut fp = FpConfig::model_free(
                    self.iterations,
                    self.q_learning.clone().unwrap_or_default(),
                    episodes,
                );
                if let BrBackend::QLearning { warm_start, .. } = &mut fp.br {
                    *warm_start = self.warm_start;
                }
                fp.density = DensityBackend::Empirical { episodes };
                fp
            }
        };
        fp.eval_every = self.eval_every;
        fp.seed = self.seed;
        fp.snapshots = self.snapshots.clone();
        fp.log_proxy = self.log_proxy;
        fp
    }
}
