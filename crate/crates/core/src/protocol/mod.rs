//! Forward model: two pair sources, field-1 interference and heralding,
//! read-out into field 2, channel losses and the field-2 detectors.

mod error;
mod experiment;
mod params;
mod stages;

pub use error::ProtocolError;
pub use experiment::{full_experiment, sample_outcome, simulation_efficiency, ExperimentOutcome};
pub use params::{
    EnsembleParams, Herald, HeraldChoice, HeraldDetectors, InterferometerParams,
};
pub use stages::{
    herald, herald_probabilities, heralded_field_state, infer_atomic, modes,
    overlap_from_extinction_db, read_stage, single_ensemble_stats, write_stage, AtomicInference,
    ConditionalFieldState, MIN_HERALD_PROBABILITY,
};
