//! Concurrence of the restricted state, its propagation back through the
//! channel budget, and auxiliary nonclassicality witnesses.

mod backprop;
mod budget;
mod concurrence;
mod error;
mod locc;
mod witness;

pub use backprop::{
    backpropagate, backpropagate_with_uncertainty, invert_attenuation, write_plane_csv, BackpropOptions,
    CoherenceRule, InputSigma, LossInversion, PlaneEstimate, PlaneRow,
};
pub use budget::{ChannelBudget, Efficiency, PathBudget, Plane};
pub use concurrence::{
    concurrence_restricted, concurrence_with_uncertainty, entanglement_of_formation, wootters_concurrence,
    ConcurrenceResult, RestrictedSigma,
};
pub use error::EntanglementError;
pub use locc::{locc_bound_check, qubit_block, LoccCheck};
pub use witness::{witnesses, EnsembleStats, PairStats, WitnessReport};
