use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("map degree must be at least 2, got {0}")]
    DegreeTooSmall(usize),

    #[error("lift does not fix 0: F(0) = {f0} is not within {tol:e} of an integer")]
    FixedPointViolated { f0: f64, tol: f64 },

    #[error("map is not uniformly expanding: certified lower bound on F' is {lambda} (need > 1)")]
    NotExpanding { lambda: f64 },

    #[error(
        "inverse branch solve did not converge (branch {branch}, target {target}, \
         residual {residual:e}); the map data is inconsistent"
    )]
    InverseBranchDiverged { branch: usize, target: f64, residual: f64 },

    #[error("invalid branch symbol {symbol} for a degree-{degree} map")]
    InvalidSymbol { symbol: usize, degree: usize },

    #[error("cone radius R = {r} must exceed the certified bound {sup_deriv} on |tau'|")]
    ConeRadiusTooSmall { r: f64, sup_deriv: f64 },

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
