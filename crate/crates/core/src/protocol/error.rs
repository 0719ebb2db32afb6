use thiserror::Error;

use crate::detection::DetectionError;
use crate::fock::FockError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error("herald probability {0:e} is below 1e-15")]
    HeraldTooRare(f64),
    #[error("invalid parameter {name}: {message}")]
    Parameter { name: String, message: String },
}

impl ProtocolError {
    pub(crate) fn param(name: &str, message: impl Into<String>) -> Self {
        Self::Parameter { name: name.to_string(), message: message.into() }
    }
}
