//! Mathematical objects of the model: dispersal kernels, reaction terms,
//! parameter sets, hypothesis checks and closed-form scalar diagnostics.

mod config;
mod diagnostics;
mod kernel;
mod reaction;

pub use config::{InitialProfile, ModelConfig, NumericsConfig, ProfileShape};
pub use diagnostics::{scalar_diagnostics, solve_equilibrium, solve_equilibrium_with, ScalarDiagnostics};
pub use kernel::{validate_kernel, KernelSpec, KERNEL_QTOL};
pub use reaction::{validate_reactions, ReactionPair};

use serde::{Deserialize, Serialize};

/// Outcome of one clause of a hypothesis check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseResult {
    pub clause: String,
    pub passed: bool,
    /// Measured violation size (0 when the clause holds exactly).
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub subject: String,
    pub clauses: Vec<ClauseResult>,
    pub passed: bool,
    /// Witness found by a scan, when a clause is existential.
    pub witness: Option<f64>,
}

impl ValidationReport {
    pub(crate) fn new(subject: impl Into<String>) -> Self {
        Self { subject: subject.into(), clauses: Vec::new(), passed: true, witness: None }
    }

    pub(crate) fn push(&mut self, clause: &str, passed: bool, residual: f64) {
        self.passed &= passed;
        self.clauses.push(ClauseResult { clause: clause.to_string(), passed, residual });
    }

    /// First failing clause, if any.
    pub fn first_failure(&self) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| !c.passed)
    }
}
