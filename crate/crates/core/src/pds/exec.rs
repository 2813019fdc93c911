//! Deterministic execution of a pushdown system.

use super::ground::{Configuration, GroundRule, Successors};
use super::PdsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Halted {
    /// The stack emptied.
    Empty,
    /// No rule applies to a nonempty stack.
    Stuck,
    /// The only applicable rule maps the configuration to itself.
    Sink,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecOutcome {
    pub config: Configuration,
    pub halted: Halted,
    pub steps: u64,
    pub trace: Vec<GroundRule>,
}

/// Runs from `initial` until no rule applies. Fails if two rules apply
/// at once or `fuel` steps pass without halting.
pub fn pds_exec(
    system: &impl Successors,
    initial: Configuration,
    fuel: u64,
) -> Result<ExecOutcome, PdsError> {
    let mut config = initial;
    let mut trace = Vec::new();
    let mut buf = Vec::new();
    for steps in 0..=fuel {
        let Some(&top) = config.stack.first() else {
            return Ok(ExecOutcome {
                config,
                halted: Halted::Empty,
                steps,
                trace,
            });
        };
        buf.clear();
        system.successors(config.globals, top, &mut buf);
        let rule = match buf.as_slice() {
            [] => {
                return Ok(ExecOutcome {
                    config,
                    halted: Halted::Stuck,
                    steps,
                    trace,
                })
            }
            [r] => *r,
            _ => {
                return Err(PdsError::NondeterministicStep(format!(
                    "top {top:?} with globals {:#x}",
                    config.globals
                )))
            }
        };
        let next = rule.apply(&config).expect("successor matches its own top");
        if next == config {
            return Ok(ExecOutcome {
                config,
                halted: Halted::Sink,
                steps,
                trace,
            });
        }
        if steps == fuel {
            break;
        }
        trace.push(rule);
        config = next;
    }
    Err(PdsError::Diverged(fuel))
}
