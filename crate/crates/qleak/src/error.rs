use crate::model::Violation;
use thiserror::Error;

/// Position-carrying syntax error from the text formats.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError { line, column, message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("nested path quantifier: {0}")]
    Nesting(String),

    #[error("invalid model:\n{}", fmt_violations(.0))]
    InvalidModel(Vec<Violation>),

    #[error("component {component} has {count} memoryless schedulers, above the limit {limit}")]
    SchedulerExplosion { component: usize, count: u128, limit: u64 },

    #[error("{0} secrets give {1} corner points, above the enumeration limit")]
    CornerExplosion(usize, u128),

    #[error("regular expression has more than {0} normal-form terms")]
    TermExplosion(usize),

    #[error("secret `{0}` has zero prior probability")]
    ZeroPrior(String),

    #[error("prior does not match the secrets of the system: {0}")]
    PriorMismatch(String),

    #[error("a priori distribution is variable; instantiate it first")]
    VariablePrior,

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("certificate width {width} cannot reach {epsilon}: {reason}")]
    EpsilonUnreachable { width: String, epsilon: String, reason: String },

    #[error("divergent loop: {0}")]
    Divergent(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

fn fmt_violations(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

pub type Result<T> = std::result::Result<T, Error>;
