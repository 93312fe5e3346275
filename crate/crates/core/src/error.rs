use thiserror::Error;

/// Errors raised by the library.
///
/// Every variant maps to a short machine-readable category through
/// [`Error::category`], which the command-line driver prints on failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("quadrature degeneracy: observation point {distance:.4} m from the antenna, need at least {minimum:.4} m")]
    QuadratureDegeneracy { distance: f64, minimum: f64 },

    #[error("{solver} did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("CFL condition violated: dt = {dt:.4e} exceeds the stable limit {limit:.4e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("line search failed after {halvings} halvings at iteration {iteration} (J = {value:.6e}, |grad| = {grad_norm:.3e})")]
    LineSearch {
        iteration: usize,
        halvings: usize,
        value: f64,
        grad_norm: f64,
    },

    #[error("profile reconstruction broke down at xi = {xi:.4}: S = {s:.3e}")]
    BlowUp { xi: f64, s: f64 },

    #[error("search failed to bracket the target {target}: scanned {lo:.3e}..{hi:.3e}, best value {best:.4}")]
    Bracket {
        target: f64,
        lo: f64,
        hi: f64,
        best: f64,
    },

    #[error("expected {expected} peaks, only {found} survived merging")]
    TooFewPeaks { expected: usize, found: usize },

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("antenna {index}: {source}")]
    Antenna {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    /// Short category tag, stable across releases.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::QuadratureDegeneracy { .. } => "quadrature",
            Error::NonConvergence { .. } => "non-convergence",
            Error::Cfl { .. } => "cfl",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::LineSearch { .. } => "line-search",
            Error::BlowUp { .. } => "blow-up",
            Error::Bracket { .. } => "bracket",
            Error::TooFewPeaks { .. } => "too-few-peaks",
            Error::EmptyRegion(_) => "empty-region",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Factorization(_) => "factorization",
            Error::Antenna { source, .. } => source.category(),
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
