//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sector too small: need at least {needed} atoms, have {have}")]
    SectorTooSmall { needed: usize, have: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate damping: gamma1 + gamma2 - gamma12 = 0, quadratic damping profile does not exist")]
    DegenerateDamping,

    #[error("matrix is not Hermitian: max |A - A^H| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); the problem appears too stiff for the requested tolerance")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("integration tolerance not achievable: {0}")]
    ToleranceNotAchievable(String),

    #[error("no loss channel has positive weight on the current state")]
    ZeroJumpWeight,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
