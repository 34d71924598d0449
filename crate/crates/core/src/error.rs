use thiserror::Error;

/// Errors raised anywhere in the modelling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of a formula (e.g. f <= 0).
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter set violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Grid too coarse to resolve the geometry.
    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("degenerate system: {0}")]
    DegenerateSystem(String),

    /// The linear solve failed or missed its tolerance.
    #[error("linear solve failed (relative residual {residual:e}): {message}")]
    Solver { message: String, residual: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    /// |R| clearly exceeds one: the extraction or the solve is broken.
    #[error("unphysical reflection |R| = {0}")]
    Physicality(f64),

    #[error("estimation error: {0}")]
    Estimation(String),

    /// A sweep table is missing grid points.
    #[error("coverage error: missing {} grid point(s): {}", missing.len(), format_missing(missing))]
    Coverage { missing: Vec<(f64, f64)> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_missing(missing: &[(f64, f64)]) -> String {
    missing
        .iter()
        .map(|(f, t)| format!("({f} Hz, {t} deg)"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
