use thiserror::Error;

use crate::groundstate::GroundState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite values produced at t = {t}")]
    NonFinite { t: f64 },

    #[error("blowup at t = {t}")]
    Blowup { t: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("ground state iteration did not converge after {max_iter} iterations")]
    GroundStateNoConvergence {
        max_iter: usize,
        best: Box<GroundState>,
    },

    #[error("ground state iteration collapsed to the zero solution")]
    DegenerateCollapse,

    #[error("no negative eigenvalue (lowest eigenvalue {e_tilde:e})")]
    NoNegativeEigenvalue { e_tilde: f64 },

    #[error("eigenfunction is not localized in the box (boundary fraction {boundary_fraction:e})")]
    Delocalized { boundary_fraction: f64 },

    #[error("invalid bracket: {0}")]
    BracketInvalid(String),

    #[error("bad field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::GridMismatch => "grid_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::Blowup { .. } => "blowup",
            Error::NoConvergence { .. } => "no_convergence",
            Error::GroundStateNoConvergence { .. } => "no_convergence",
            Error::DegenerateCollapse => "degenerate_collapse",
            Error::NoNegativeEigenvalue { .. } => "no_negative_eigenvalue",
            Error::Delocalized { .. } => "delocalized",
            Error::BracketInvalid(_) => "bracket_invalid",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}
