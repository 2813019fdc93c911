//! Which variables an observer sees, and extra constraints on paired inputs.

use serde::{Deserialize, Serialize};

use crate::frontend::ast::{Expr, Label, Program};

/// Suffix that distinguishes the second copy's names from the first's.
pub const COPY_SUFFIX: &str = "t";

pub fn copy_name(name: &str) -> String {
    format!("{name}{COPY_SUFFIX}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Flavor {
    #[default]
    Confidentiality,
    /// The dual problem: high-integrity globals must not depend on
    /// low-integrity inputs. Same machinery with the labels swapped.
    Integrity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecuritySpec {
    pub flavor: Flavor,
    /// Globals that must agree between the two runs, both initially and
    /// at the end.
    pub observed: Vec<String>,
    /// Extra conditions on the initial pair. Names refer to the first run;
    /// a name followed by the copy suffix refers to the second run.
    pub assume: Vec<Expr>,
}

impl SecuritySpec {
    pub fn confidentiality(program: &Program) -> Self {
        SecuritySpec {
            flavor: Flavor::Confidentiality,
            observed: program.with_label(Label::Low),
            assume: Vec::new(),
        }
    }

    pub fn integrity(program: &Program) -> Self {
        SecuritySpec {
            flavor: Flavor::Integrity,
            observed: program.with_label(Label::High),
            assume: Vec::new(),
        }
    }

    pub fn with_observed(mut self, observed: Vec<String>) -> Self {
        self.observed = observed;
        self
    }

    pub fn with_assumptions(mut self, assume: Vec<Expr>) -> Self {
        self.assume = assume;
        self
    }

    pub fn observes(&self, name: &str) -> bool {
        self.observed.iter().any(|o| o == name)
    }

    /// Checks that every observed name is a declared global and every
    /// assumption mentions only paired global names.
    pub fn validate(&self, program: &Program) -> Result<(), SpecError> {
        for o in &self.observed {
            if !program.is_global(o) {
                return Err(SpecError::NotAGlobal(o.clone()));
            }
        }
        for a in &self.assume {
            for v in a.vars() {
                if resolve_paired(program, &v).is_none() {
                    return Err(SpecError::UnknownAssumptionVariable(v));
                }
            }
        }
        Ok(())
    }
}

/// Maps a paired name to `(global, copy index)`.
pub fn resolve_paired(program: &Program, name: &str) -> Option<(String, usize)> {
    if program.is_global(name) {
        return Some((name.to_string(), 0));
    }
    let stem = name.strip_suffix(COPY_SUFFIX)?;
    program.is_global(stem).then(|| (stem.to_string(), 1))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("observed variable `{0}` is not a declared global")]
    NotAGlobal(String),
    #[error("assumption mentions `{0}`, which is neither a global nor a copy of one")]
    UnknownAssumptionVariable(String),
}
