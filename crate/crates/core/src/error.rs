use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum SlpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("NNLS did not converge after {iterations} iterations (KKT residual {kkt_residual:.3e})")]
    NnlsMaxIter {
        iterations: usize,
        kkt_residual: f64,
        best: Vec<f64>,
    },

    #[error("barrier Newton did not converge after {iterations} iterations (gap {gap:.3e})")]
    NewtonMaxIter {
        iterations: usize,
        gap: f64,
        best: Vec<f64>,
    },

    #[error("Dinkelbach iteration did not converge in {outer} outer steps (last inner value {inner_value:.3e})")]
    DinkelbachMaxIter {
        outer: usize,
        inner_value: f64,
        lambda_trace: Vec<f64>,
    },

    #[error("infeasible subproblem: {0}")]
    Infeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SlpError>;
