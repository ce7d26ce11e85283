use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "truncation window radius {radius} exceeded the limit {max_radius}: escaped mass {deficit:e} >= tail_tol {tail_tol:e}"
    )]
    Truncation {
        radius: i64,
        max_radius: i64,
        deficit: f64,
        tail_tol: f64,
    },

    #[error("quadrature did not converge: estimated error {achieved:e} > requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error(
        "explicit scheme blew up at step {step}: dt = {dt:e} but the stability limit for dx = {dx:e}, kappa = {kappa} is {limit:e}"
    )]
    Unstable {
        step: usize,
        dt: f64,
        dx: f64,
        kappa: f64,
        limit: f64,
    },

    #[error("atom at {position} lies outside the grid component [{lo}, {hi}]")]
    OutsideGrid { position: f64, lo: f64, hi: f64 },

    #[error("measure is not normalized: total weight {total}")]
    NotNormalized { total: f64 },

    #[error("optimizer did not converge: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
