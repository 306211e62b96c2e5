use std::collections::BTreeSet;
use std::fmt;

use super::{Dynamics, FiniteMFG, Mode, Symbol, UNIT_SYMBOL};

/// One violated model invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "error: {v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// Symbols that appear on tree edges, or the unit symbol in discounted mode.
pub(crate) fn symbols_in_use(model: &FiniteMFG) -> Vec<Symbol> {
    if model.is_discounted() {
        return vec![UNIT_SYMBOL];
    }
    let set: BTreeSet<Symbol> = model
        .tree()
        .nodes()
        .iter()
        .filter(|n| n.parent.is_some())
        .map(|n| n.symbol)
        .collect();
    set.into_iter().collect()
}

/// Lists every violated invariant of the model. Read-only.
pub fn validate_mfg(model: &FiniteMFG) -> ValidationReport {
    let mut report = ValidationReport::default();
    let (ns, na) = (model.num_states(), model.num_actions());
    if ns == 0 {
        report.push("states", "state set is empty");
    }
    if na == 0 {
        report.push("actions", "action set is empty");
    }

    match model.mode() {
        Mode::Finite { horizon } => {
            if model.tree().depth() != horizon + 1 {
                report.push(
                    "noise_tree",
                    format!(
                        "tree depth {} does not equal horizon + 1 = {}",
                        model.tree().depth(),
                        horizon + 1
                    ),
                );
            }
        }
        Mode::Discounted { gamma } => {
            if !(gamma > 0.0 && gamma < 1.0) {
                report.push("discount", format!("discount {gamma} is outside (0, 1)"));
            }
            if model.depends_on_population() {
                report.push(
                    "transition",
                    "population-dependent dynamics are not supported in discounted mode",
                );
            }
        }
    }

    let mu0 = model.mu0();
    if mu0.len() != ns {
        report.push("mu0", format!("has {} entries, expected {ns}", mu0.len()));
    } else {
        for (x, &m) in mu0.iter().enumerate() {
            if !(m >= 0.0) {
                report.push(format!("mu0 (x={x})"), format!("entry {m} is negative or NaN"));
            }
        }
        let total: f64 = mu0.iter().sum();
        if !((total - 1.0).abs() <= 1e-12) {
            report.push("mu0", format!("entries sum to {total}"));
        }
    }

    for (id, msg) in model.tree().violations() {
        report.push(format!("noise_tree (node {id})"), msg);
    }

    if ns > 0 && na > 0 && mu0.len() == ns {
        let symbols = symbols_in_use(model);
        if let Dynamics::Fixed(ks) = model.dynamics() {
            if ks.is_empty() {
                report.push("transition", "no kernels given");
                return finish(model, report);
            }
        }
        for &xi in &symbols {
            let kernel = model.kernel(xi, mu0);
            if kernel.num_states() != ns || kernel.num_actions() != na {
                report.push(
                    format!("transition (ξ={xi})"),
                    format!(
                        "kernel shape {}x{} does not match {ns}x{na}",
                        kernel.num_states(),
                        kernel.num_actions()
                    ),
                );
                continue;
            }
            for x in 0..ns {
                for a in 0..na {
                    let (_, probs) = kernel.row(x, a);
                    let sum: f64 = probs.iter().sum();
                    if probs.iter().any(|p| !(*p >= 0.0)) {
                        report.push(
                            format!("transition (x={x}, a={a}, ξ={xi})"),
                            "row has a negative or NaN entry",
                        );
                    } else if !((sum - 1.0).abs() <= 1e-12) {
                        report.push(
                            format!("transition (x={x}, a={a}, ξ={xi})"),
                            format!("row sums to {sum}"),
                        );
                    }
                }
            }
            let r = model.reward_table(xi, mu0);
            if let Some(i) = r.iter().position(|v| !v.is_finite()) {
                report.push(
                    format!("reward (x={}, a={}, ξ={xi})", i / na, i % na),
                    "reward is not finite at mu0",
                );
            }
        }
    }
    finish(model, report)
}

fn finish(model: &FiniteMFG, mut report: ValidationReport) -> ValidationReport {
    report.warnings.extend(model.notes().iter().cloned());
    report
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{CrowdTerm, Kernel, TabularReward};

    fn two_state(row0: [f64; 2], mu0: Vec<f64>) -> FiniteMFG {
        let kernel = Kernel::from_dense(&[vec![row0.to_vec()], vec![vec![0.0, 1.0]]]);
        FiniteMFG::new(
            "t",
            2,
            1,
            Mode::Finite { horizon: 2 },
            mu0,
            None,
            Dynamics::Fixed(vec![kernel]),
            Arc::new(TabularReward::new(vec![vec![0.0], vec![1.0]], CrowdTerm::None)),
        )
    }

    #[test]
    fn valid_model_has_empty_report() {
        let r = validate_mfg(&two_state([0.5, 0.5], vec![1.0, 0.0]));
        assert!(r.is_valid(), "{r}");
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn short_transition_row_is_named() {
        let r = validate_mfg(&two_state([0.5, 0.4], vec![1.0, 0.0]));
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].location, "transition (x=0, a=0, ξ=0)");
        assert!(r.violations[0].message.contains("0.9"));
    }

    #[test]
    fn negative_mu0_entry_is_named() {
        let r = validate_mfg(&two_state([0.5, 0.5], vec![1.5, -0.5]));
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].location, "mu0 (x=1)");
    }

    #[test]
    fn validation_is_idempotent() {
        let m = two_state([0.5, 0.4], vec![1.5, -0.5]);
        assert_eq!(validate_mfg(&m), validate_mfg(&m));
    }

    #[test]
    fn tree_depth_must_match_horizon() {
        let m = two_state([0.5, 0.5], vec![1.0, 0.0]);
        let bad = FiniteMFG::new(
            "t",
            2,
            1,
            Mode::Finite { horizon: 2 },
            vec![1.0, 0.0],
            Some(crate::model::NoiseTree::degenerate(2)),
            m.dynamics().clone(),
            Arc::new(TabularReward::new(vec![vec![0.0], vec![1.0]], CrowdTerm::None)),
        );
        let r = validate_mfg(&bad);
        assert!(r.violations.iter().any(|v| v.location == "noise_tree"));
    }
}
