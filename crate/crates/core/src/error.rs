use thiserror::Error;

pub type Result<T> = std::result::Result<T, QrlsError>;

#[derive(Debug, Error)]
pub enum QrlsError {
    #[error("{op}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{op}: matrix must be square, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("{op}: {rows} rows exceeds the dense size cap of {cap}")]
    SizeCapExceeded {
        op: &'static str,
        rows: usize,
        cap: usize,
    },

    #[error("matrix is numerically singular (condition estimate {condition_estimate:e})")]
    Singular { condition_estimate: f64 },

    #[error("dense decomposition failed to converge in {op}")]
    NoConvergence { op: &'static str },

    #[error("invalid case label '{label}' for a {dim}D problem")]
    InvalidCase { label: String, dim: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero diagonal entry at row {row}; the Jacobi preconditioner is undefined")]
    ZeroDiagonal { row: usize },

    #[error("analytic spectrum unavailable: {0}")]
    UnsupportedAnalytic(String),

    #[error("contraction not certified: {quantity} = {value:e} exceeds {bound:e}")]
    ContractionViolation {
        quantity: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("bound violated: {quantity} = {computed:e} > {bound:e}")]
    BoundViolation {
        quantity: &'static str,
        computed: f64,
        bound: f64,
    },

    #[error("inverse polynomial degree cap {cap} reached; best certified error {achieved:e} > {target:e}")]
    DegreeCapExceeded {
        cap: usize,
        achieved: f64,
        target: f64,
    },

    #[error("right-hand side is zero; no state can be prepared")]
    ZeroRhs,

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("measurement did not succeed within {cap} attempts (outcomes: {outcomes:?})")]
    AttemptCapExceeded { cap: usize, outcomes: Vec<usize> },

    #[error("lemma hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("{}: key '{key}': {message}", config_location(*line))]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<QrlsError>,
    },
}

/// Line 0 marks values that came from overrides rather than the file.
fn config_location(line: usize) -> String {
    if line == 0 {
        "command line".into()
    } else {
        format!("config line {line}")
    }
}

impl QrlsError {
    /// Short stable identifier, used by the command line tool's error line.
    pub fn kind(&self) -> &'static str {
        match self {
            QrlsError::DimensionMismatch { .. } => "dimension_mismatch",
            QrlsError::NotSquare { .. } => "not_square",
            QrlsError::SizeCapExceeded { .. } => "size_cap",
            QrlsError::Singular { .. } => "singular",
            QrlsError::NoConvergence { .. } => "no_convergence",
            QrlsError::InvalidCase { .. } => "invalid_case",
            QrlsError::InvalidArgument(_) => "invalid_argument",
            QrlsError::ZeroDiagonal { .. } => "zero_diagonal",
            QrlsError::UnsupportedAnalytic(_) => "unsupported_analytic",
            QrlsError::ContractionViolation { .. } => "contraction",
            QrlsError::BoundViolation { .. } => "bound_violation",
            QrlsError::DegreeCapExceeded { .. } => "degree_cap",
            QrlsError::ZeroRhs => "zero_rhs",
            QrlsError::NotNormalized { .. } => "not_normalized",
            QrlsError::AttemptCapExceeded { .. } => "attempt_cap",
            QrlsError::Hypothesis(_) => "hypothesis",
            QrlsError::Config { .. } => "config",
            QrlsError::Parse { .. } => "parse",
            QrlsError::Io(_) => "io",
            QrlsError::Context { source, .. } => source.kind(),
        }
    }

    /// Wraps the error with a description of what was being run.
    pub fn context(self, context: impl Into<String>) -> Self {
        QrlsError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
