//! Lexing, parsing, validation and pretty-printing of `.nil` programs.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod validate;

use ast::{Expr, Program, Span};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrontendError {
    #[error("{span}: {message}")]
    Lex { message: String, span: Span },
    #[error("{span}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        expected: Vec<String>,
        found: String,
        span: Span,
    },
    #[error("{span}: variable `{name}` is not in scope in procedure `{procedure}`")]
    UndeclaredVariable {
        name: String,
        procedure: String,
        span: Span,
    },
    #[error(
        "{span}: out-argument `{name}` must be a global or the out-parameter of `{procedure}`"
    )]
    OutParamNotGlobal {
        name: String,
        procedure: String,
        span: Span,
    },
    #[error("{span}: `main` may not call itself")]
    MainRecursive { span: Span },
    #[error("{span}: procedure `{caller}` calls `main`")]
    CallsMain { caller: String, span: Span },
    #[error("{span}: procedure `{name}` is declared twice")]
    DuplicateProcedure { name: String, span: Span },
    #[error("{span}: global `{name}` is declared twice")]
    DuplicateGlobal { name: String, span: Span },
    #[error("program has no `main` procedure")]
    MissingMain,
    #[error("{span}: call to unknown procedure `{name}`")]
    UnknownProcedure { name: String, span: Span },
    #[error("{span}: `main` takes no parameters")]
    MainHasParameters { span: Span },
    #[error("{span}: procedure `{name}` needs an `in` and an `out` parameter")]
    MissingParameters { name: String, span: Span },
}

impl FrontendError {
    pub fn span(&self) -> Option<Span> {
        match self {
            FrontendError::Lex { span, .. }
            | FrontendError::Syntax { span, .. }
            | FrontendError::UndeclaredVariable { span, .. }
            | FrontendError::OutParamNotGlobal { span, .. }
            | FrontendError::MainRecursive { span }
            | FrontendError::CallsMain { span, .. }
            | FrontendError::DuplicateProcedure { span, .. }
            | FrontendError::DuplicateGlobal { span, .. }
            | FrontendError::UnknownProcedure { span, .. }
            | FrontendError::MainHasParameters { span }
            | FrontendError::MissingParameters { span, .. } => Some(*span),
            FrontendError::MissingMain => None,
        }
    }
}

/// Parses and validates a complete program.
pub fn parse_program(source: &str) -> Result<Program, FrontendError> {
    validate::validate(parse_unchecked(source)?)
}

/// Parses without scope checking or alpha-renaming.
pub fn parse_unchecked(source: &str) -> Result<Program, FrontendError> {
    parser::parse(&lexer::tokenize(source)?)
}

pub fn parse_expression(source: &str) -> Result<Expr, FrontendError> {
    parser::parse_expr(&lexer::tokenize(source)?)
}
