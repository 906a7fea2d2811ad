use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate normalization: field has zero L2 norm")]
    DegenerateNormalization,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("negative density {value:e} at cell {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("radial grid too short: r_max = {r_max} but {required} is needed to cover the box")]
    RadialTooShort { r_max: f64, required: f64 },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("divergence at iteration {iteration}: total {total} fell below the coercivity floor (kinetic {kinetic})")]
    Divergence { iteration: usize, total: f64, kinetic: f64 },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
