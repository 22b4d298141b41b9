use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown catalog model `{0}`")]
    Catalog(String),

    #[error("model `{model}`: {reason}")]
    Model { model: String, reason: String },

    #[error("state left the finite range at t = {t}")]
    Divergence { t: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    /// The Gramian of the window is not positive definite, so the window
    /// does not strongly distinguish the state.
    #[error(
        "observability failure at t = {t}: normalized pivot {pivot:e} below tolerance {tol:e}"
    )]
    Observability { t: f64, pivot: f64, tol: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
