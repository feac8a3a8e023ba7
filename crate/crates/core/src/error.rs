use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{func}: argument {arg} outside domain ({reason})")]
    Domain {
        func: &'static str,
        arg: f64,
        reason: &'static str,
    },
    #[error("invalid parameters: {}", .0.join("; "))]
    Params(Vec<String>),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("integrand returned NaN at {0:?}")]
    NanIntegrand(Vec<f64>),
    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),
    #[error("degenerate system: {0}")]
    Degenerate(String),
    #[error("iteration failed: {0}")]
    Divergence(String),
    #[error("step size underflow at ({r}, {eps})")]
    StepUnderflow { r: f64, eps: f64 },
    #[error("config errors:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
