use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("register needs at least one mode and cutoff >= 1 (got {n_modes} modes, cutoff {cutoff})")]
    InvalidRegister { n_modes: usize, cutoff: usize },

    #[error("register dimension {dimension} exceeds the configured bound {limit}")]
    DimensionTooLarge { dimension: usize, limit: usize },

    #[error("mode index {mode} out of range for a register of {n_modes} modes")]
    ModeOutOfRange { mode: usize, n_modes: usize },

    #[error("beam splitter needs two distinct modes (got {0} twice)")]
    SameMode(usize),

    #[error("{name} = {value} outside [0, 1]")]
    OutOfUnitInterval { name: &'static str, value: f64 },

    #[error("excitation probability chi = {0} must lie in [0, 1)")]
    InvalidChi(f64),

    #[error("matrix shape {rows}x{cols} does not match register dimension {dimension}")]
    ShapeMismatch { rows: usize, cols: usize, dimension: usize },

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace {0} differs from 1")]
    BadTrace(f64),

    #[error("operator has negative eigenvalue {0:e}")]
    NotPositive(f64),

    #[error("state norm {0} differs from 1")]
    BadNorm(f64),

    #[error("partial trace needs a nonempty set of kept modes")]
    EmptyKeep,

    #[error("duplicate mode {0} in mode list")]
    DuplicateMode(usize),

    #[error("operator reaches photon number {reach} but the register cutoff is {cutoff}")]
    Truncation { reach: usize, cutoff: usize },

    #[error("registers differ: {0}")]
    RegisterMismatch(String),

    #[error("cannot renormalise a state with vanishing weight {0:e}")]
    ZeroWeight(f64),
}
