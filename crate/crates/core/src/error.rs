use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("no sign change on [{lo}, {hi}] (f(lo) = {flo}, f(hi) = {fhi})")]
    NoSignChange {
        lo: f64,
        hi: f64,
        flo: f64,
        fhi: f64,
    },

    #[error("{method} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "ill-conditioned Newton Jacobian (condition estimate {condition:e}); likely near a fold"
    )]
    IllConditioned { condition: f64 },

    #[error("grazing switching: {0}")]
    Grazing(String),

    #[error("non-smooth point: {0}")]
    NonSmooth(String),

    #[error("trajectory diverged: |x| = {norm:e} after {cycles} cycles")]
    Divergence { norm: f64, cycles: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("document error: {0}")]
    Document(String),
}
