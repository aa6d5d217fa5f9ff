//! Report-style validation results.
//!
//! Validators in this crate collect every violation they find instead of
//! stopping at the first one, so a single pass over a config file surfaces
//! all problems at once.

use serde::{Deserialize, Serialize};

/// Outcome of a report-style validation pass.
///
/// An empty violation list means the checked object satisfies all of its
/// invariants.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Human-readable description of each violated invariant, including the
    /// location ((state, action) pair, field name, ...) where it was found.
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn violation(&mut self, message: impl Into<String>) {
        self.violations.push(message.into());
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Merges another report into this one, prefixing each imported
    /// violation with `context`.
    pub fn absorb(&mut self, context: &str, other: ValidationReport) {
        for v in other.violations {
            self.violations.push(format!("{context}: {v}"));
        }
    }
}
