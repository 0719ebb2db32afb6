use thiserror::Error;

use crate::fock::FockError;
use crate::tomography::TomographyError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntanglementError {
    #[error(transparent)]
    Tomography(#[from] TomographyError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("not a valid two-qubit state: {0}")]
    InvalidState(String),
    #[error("unphysical after back-propagation: {0}")]
    Unphysical(String),
    #[error("{0} is zero")]
    ZeroDenominator(&'static str),
    #[error("budget: {0}")]
    Budget(String),
    #[error("csv: {0}")]
    Csv(String),
}
