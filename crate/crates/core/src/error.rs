use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("resonator frequency constraint violated: omega1 - omega2 - g(beta^2-1)/beta = {residual:e}")]
    ConstraintViolation { residual: f64 },

    #[error("integrator step size underflow at t = {t}: the problem looks stiff; shorten the span or use the static-Liouvillian steady-state path")]
    Stiffness { t: f64 },

    #[error("numerical failure: {message} (residual {residual:e})")]
    NumericalFailure { message: String, residual: f64 },

    #[error("steady state is not unique: two start vectors converged {distance:e} apart in trace distance")]
    AmbiguousSteadyState { distance: f64 },

    #[error("second-order correlation undefined for port {port}: mean photon flux {flux:e} is below 1e-12")]
    UndefinedCorrelation { port: usize, flux: f64 },

    #[error("QPD grid too coarse: negativity at s = {s} changes under grid refinement")]
    Resolution { s: f64 },

    #[error("configuration invalid: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error originates in a numerical routine rather than in
    /// user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Stiffness { .. }
                | Error::NumericalFailure { .. }
                | Error::AmbiguousSteadyState { .. }
                | Error::UndefinedCorrelation { .. }
                | Error::Resolution { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
