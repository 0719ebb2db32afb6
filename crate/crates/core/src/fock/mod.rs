//! Truncated multimode Fock-space linear algebra.
//!
//! Every mode is truncated at the same photon-number `cutoff`, so a register
//! of `n` modes spans `(cutoff + 1)^n` basis states. Basis index digits are
//! ordered with mode 0 most significant, i.e. the usual Kronecker order
//! `|n_0⟩ ⊗ |n_1⟩ ⊗ …`.
//!
//! States are immutable values: every channel returns a fresh state.

mod density;
mod error;
mod local;
mod normal;
mod optics;
mod register;
mod state;

pub use density::{fidelity, partial_trace, DensityOperator};
pub use error::FockError;
pub use normal::{normal_ordered_expectation, ModeFactor, NormalOrderedOp, NormalOrderedTerm};
pub use optics::{
    apply_beamsplitter, apply_dephasing, apply_loss, apply_phase, beamsplitter_unitary,
    loss_kraus_operators, LinearOpticsElement,
};
pub use register::{ModeRegister, MAX_DIMENSION};
pub use state::{two_mode_squeezed, FockState, PureState, TRUNCATION_WARNING_THRESHOLD};

pub(crate) use local::embed_vacuum_matrix;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Numerical tolerances applied when constructing states.
pub mod tol {
    /// Maximum deviation from Hermiticity accepted for a density operator.
    pub const HERMITIAN: f64 = 1e-10;
    /// Maximum deviation of the trace from one.
    pub const TRACE: f64 = 1e-10;
    /// Most negative eigenvalue tolerated (numerical positivity).
    pub const POSITIVITY: f64 = 1e-9;
    /// Normalisation tolerance for pure states.
    pub const NORM: f64 = 1e-12;
}
