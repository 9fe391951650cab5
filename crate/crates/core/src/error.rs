//! Error types shared across the library.

use thiserror::Error;

/// Errors about term structure and positions.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("invalid position {0}")]
    InvalidPosition(String),
    #[error("unknown context class `{0}` (expected A, R, S or C)")]
    UnknownClass(String),
}

/// A syntax error in concrete source text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Errors while reading a constructor table.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CtorTableError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("constructor `{0}` declared more than once")]
    DuplicateConstructor(String),
    #[error("type `{0}` declared more than once")]
    DuplicateType(String),
}

/// Errors from the transformation catalog.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("unknown transformation `{0}`")]
    UnknownRule(String),
    #[error("match no longer applies to the given term (stale match for {0})")]
    StaleMatch(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

/// Errors from frontier evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontierError {
    #[error("word `{0}` requires a deterministic step before the next choice (strict mode)")]
    StrictnessViolation(String),
    #[error("word `{0}` reaches a term that is not a choice redex")]
    NoChoice(String),
    #[error("not a frontier: {0}")]
    InvalidFrontier(String),
}

/// Errors from the equivalence lab.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquivError {
    #[error("context `{0}` is not a reduction context")]
    NotReductionContext(String),
}

/// Errors from diagram checking.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiagramError {
    #[error("no overlap: {0}")]
    NoOverlap(String),
    #[error("unknown diagram set `{0}`")]
    UnknownSet(String),
}
