use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuditError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("density matrix trace {trace} deviates from 1")]
    BadTrace { trace: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("eigen-decomposition did not converge")]
    EigenFailure,

    #[error("integration step {step_ns} ns exceeds the allowed maximum {max_ns} ns")]
    StepTooLarge { step_ns: f64, max_ns: f64 },

    #[error("invalid pulse sequence: {0}")]
    InvalidSequence(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("fit did not converge after {iterations} iterations (cost {cost:.3e}, last step {last_step:.3e})")]
    FitDiverged {
        iterations: usize,
        cost: f64,
        last_step: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("underdetermined inversion: {lines} lines for {unknowns} unknowns")]
    Underdetermined { lines: usize, unknowns: usize },

    #[error("invalid detuning: probe {nu_probe} MHz must exceed fringe frequency {f_r} MHz")]
    InvalidDetuning { nu_probe: f64, f_r: f64 },
}

pub type Result<T> = std::result::Result<T, QuditError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> QuditError {
    QuditError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
