//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum DdError {
    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("quadrature degree {requested} unsupported (max {max})")]
    QuadratureDegree { requested: usize, max: usize },

    #[error("unsupported order {order} for {space} (valid {min}..={max})")]
    UnsupportedOrder {
        space: &'static str,
        order: usize,
        min: usize,
        max: usize,
    },

    #[error("boundary value id {0} is not bound to a function")]
    UnboundBoundaryValue(u32),

    #[error("singular matrix: zero pivot at dof {dof}")]
    ZeroPivot { dof: usize },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("Newton solver failed to converge after {iters} iterations (residual history: {history:?})")]
    NewtonDiverged { iters: usize, history: Vec<f64> },

    #[error("negative conductivity k({temperature}) = {k}")]
    NegativeConductivity { temperature: f64, k: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DdError>;
