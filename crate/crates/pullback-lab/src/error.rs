//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Variants carry enough context
//! (step index, offending value, config line) that callers can report a
//! failure without re-deriving state.

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A family was asked for a perturbation level outside its schedule.
    #[error("eta = {eta} is neither 0 nor a member of the family schedule")]
    UnknownEta { eta: f64 },

    /// The discrete L2 norm crossed the blow-up ceiling during time stepping.
    #[error("blow-up at step {step} (t = {t}): |u| = {norm:.3e} exceeds ceiling {ceiling:.3e}")]
    BlowUp {
        step: usize,
        t: f64,
        norm: f64,
        ceiling: f64,
    },

    /// A tridiagonal solve lost diagonal dominance. Cannot occur for the
    /// operators assembled here; guarded anyway.
    #[error("tridiagonal solve degenerated at row {row} (pivot {pivot:.3e})")]
    SolverFailure { row: usize, pivot: f64 },

    /// Two fields (or a field and a profile) live on different grids.
    #[error("grid mismatch: {left} vs {right} interior nodes")]
    GridMismatch { left: usize, right: usize },

    /// An exponentially weighted tail integral does not converge: the total
    /// exponent of some term with unbounded support is <= 0.
    #[error("tail integral diverges: net exponent {exponent:.6} <= 0 on an unbounded window")]
    DivergentTail { exponent: f64 },

    /// A decay exponent left the admissible open interval (0, 2*m*lambda1).
    #[error("mu = {mu} outside the open interval (0, {upper})")]
    InvalidMu { mu: f64, upper: f64 },

    /// The pullback schedule ran out before successive clouds stabilized.
    #[error("pullback schedule exhausted without stabilization (last metric {last_metric:.3e}, tol {tol:.3e})")]
    NoStabilization { last_metric: f64, tol: f64 },

    /// The configuration text could not be parsed.
    #[error("config parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    /// The configuration parsed but failed validation.
    #[error("config validation failed for `{key}`: {reason}")]
    Validation { key: String, reason: String },

    /// A descriptor or family rule was structurally invalid.
    #[error("descriptor error: {0}")]
    Descriptor(String),

    /// An output artifact could not be written.
    #[error("io error on {path}: {reason}")]
    Io { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: config problems exit 2, runtime
    /// failures exit 3 (acceptance-gate failures exit 1 and are not errors).
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Parse { .. } | Error::Validation { .. } => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            reason: err.to_string(),
        }
    }
}
