//! Noninterference checking for a small imperative language with
//! first-order procedures, via symbolic pushdown systems.

pub mod checker;
pub mod corpus;
pub mod derive;
mod error;
pub mod export;
pub mod frontend;
pub mod interp;
pub mod pds;
pub mod security;
pub mod selfcomp;
pub mod value;

pub use checker::{check_ti, CheckError, CheckReport, Verdict};
pub use error::Error;
pub use frontend::ast::{Expr, Label, Program, Stmt};
pub use frontend::{parse_program, FrontendError};
pub use selfcomp::{compose, ComposeError, ComposedPds, Mode};
pub use value::{Domain, DomainError};
