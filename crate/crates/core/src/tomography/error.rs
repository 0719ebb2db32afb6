use thiserror::Error;

use super::MleEstimate;
use crate::detection::DetectionError;
use crate::fock::FockError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TomographyError {
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("no weight in the {{00,01,10,11}} block (P̃ = {0:e})")]
    ZeroRetained(f64),
    #[error("class probabilities inconsistent: {0}")]
    BadClasses(String),
    #[error("{name} = {value:e} is below zero by more than 3σ (σ = {sigma:e})")]
    Inconsistent { name: &'static str, value: f64, sigma: f64 },
    #[error("forward map is singular: {0}")]
    Singular(String),
    #[error("fringe scan ill-posed: {0}")]
    IllPosed(String),
    #[error("data quality: {0}")]
    DataQuality(String),
    #[error("no usable records: {0}")]
    NoData(String),
    #[error("likelihood fit stopped after {iterations} iterations with duality gap {gap:e}")]
    NotConverged { iterations: usize, gap: f64, best: Box<MleEstimate> },
    #[error("{0}")]
    Option(String),
}
