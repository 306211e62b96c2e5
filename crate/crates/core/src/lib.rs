//! Fictitious Play for finite-state mean field games.
//!
//! The crate is organized around a [`model::FiniteMFG`] and slot-indexed
//! tables ([`model::PolicyFlow`], [`model::DistributionFlow`],
//! [`model::QTable`]). A slot is one `(step, scenario-tree node)` pair.
//!
//! ```no_run
//! use mfg_fp::environments::{build_env, EnvName};
//! use mfg_fp::fictitious_play::{run_fp, FpConfig};
//!
//! let model = build_env(EnvName::BeachBar.as_str(), &serde_json::Value::Null).unwrap();
//! let result = run_fp(&model, &FpConfig::model_based(100)).unwrap();
//! println!("{:?}", result.trace.last());
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod best_response;
pub mod distribution;
pub mod environments;
pub mod error;
pub mod fictitious_play;
pub mod harness;
pub(crate) mod linalg;
pub mod metrics;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
