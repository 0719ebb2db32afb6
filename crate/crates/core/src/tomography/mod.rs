//! From count records back to the field state.
//!
//! The two-stage route inverts the diagonal-layout class probabilities for
//! the populations, fits the fringe-layout scan for the visibility, and
//! turns the visibility into the coherence `d`. The likelihood fit uses
//! all records of both layouts jointly.

mod coherence;
mod diagonal;
mod error;
mod fringe;
mod mle;
mod pipeline;
mod restricted;

pub use coherence::{coherence_phase, estimate_coherence, CoherenceEstimate, CoherenceMode};
pub use diagonal::{
    diagonal_response, invert_diagonal, invert_diagonal_with, ClassData, DiagonalEstimate, DiagonalOptions,
    DIAGONAL_NAMES,
};
pub use error::TomographyError;
pub use fringe::{fit_fringe, phase_difference, ArmFit, FringeFit, FringePoint, FringeScan};
pub use mle::{mle_fit, mle_fit_from, MeasurementModel, MleEstimate, MleOptions};
pub use pipeline::{
    analyze_records, split_records, two_stage, AnalysisOptions, MleSigma, MleSummary, TomographyResult, TwoStageEstimate,
    Uncertainties,
};
pub use restricted::{
    effects, embed, field_register, project, restrict, restrict_matrix, restricted_state, RestrictedDensity, BASIS,
};
