use crate::config::ExperimentConfig;
use crate::detection::{sample_counts, CountRecord, DetectionError, JointProbabilities};
use crate::entanglement::Plane;
use crate::fock::{DensityOperator, LinearOpticsElement};
use crate::layout::{layout_probabilities, EfficiencyModel, Setting};
use crate::rng;

use super::{heralded_field_state, ConditionalFieldState, ProtocolError};

/// Everything the forward model produces for one configuration and herald.
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    /// Conditional field state at the ensemble output.
    pub field: ConditionalFieldState,
    /// The field state propagated to each plane, ensemble outward.
    pub planes: Vec<(Plane, DensityOperator)>,
    /// Efficiencies from the ensemble output to the clicks.
    pub efficiency: EfficiencyModel,
    pub diagonal: Option<JointProbabilities>,
    /// `(φ, probabilities)` over the fringe grid.
    pub fringe: Vec<(f64, JointProbabilities)>,
}

impl ExperimentOutcome {
    pub fn plane(&self, plane: Plane) -> &DensityOperator {
        &self.planes.iter().find(|(p, _)| *p == plane).expect("all planes present").1
    }
}

/// Efficiencies from the ensemble output to the clicks: path losses from
/// the budget, detector efficiencies and splitters from the detector block.
pub fn simulation_efficiency(config: &ExperimentConfig) -> EfficiencyModel {
    let (eta_l, eta_r) = config.channel.segment(Plane::Z2, Plane::Z0);
    let d = &config.detectors;
    EfficiencyModel {
        eta_l,
        eta_r,
        eta_2a: d.d2a,
        eta_2b: d.d2b,
        eta_2c: d.d2c,
        split: d.split,
        bs2_t: d.bs2_t,
        dark_count: d.dark_count,
    }
}

fn attenuate(rho: &DensityOperator, (l, r): (f64, f64)) -> Result<DensityOperator, ProtocolError> {
    Ok(rho.apply_all(&[
        LinearOpticsElement::Loss { eta: l, mode: 0 },
        LinearOpticsElement::Loss { eta: r, mode: 1 },
    ])?)
}

/// Write, herald, read, propagate through the channel budget, and evaluate
/// click probabilities in the configured layouts.
pub fn full_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, ProtocolError> {
    config.validate().map_err(|e| ProtocolError::param(&e.path, e.message))?;
    let field = heralded_field_state(
        &config.ensembles.left,
        &config.ensembles.right,
        &config.interferometer,
        &config.herald,
        &config.detectors.herald(),
        config.cutoff,
    )?;
    let b = &config.channel;
    let z1 = attenuate(&field.rho, b.segment(Plane::Z2, Plane::Z1))?;
    let z0 = attenuate(&z1, b.segment(Plane::Z1, Plane::Z0))?;
    let det = attenuate(&z0, b.segment(Plane::Z0, Plane::Detector))?;
    let planes = vec![(Plane::Z2, field.rho.clone()), (Plane::Z1, z1), (Plane::Z0, z0), (Plane::Detector, det)];

    let efficiency = simulation_efficiency(config);
    let diagonal = if config.layout.diagonal() {
        Some(layout_probabilities(&field.rho, &efficiency, Setting::Diagonal)?)
    } else {
        None
    };
    let mut fringe = Vec::new();
    if config.layout.fringe() {
        for phi in config.fringe.phis() {
            fringe.push((phi, layout_probabilities(&field.rho, &efficiency, Setting::Fringe { phi })?));
        }
    }
    Ok(ExperimentOutcome { field, planes, efficiency, diagonal, fringe })
}

/// Synthetic count records for an outcome: one diagonal record and one
/// record per fringe phase. Stream labels are
/// `"{herald}/diagonal"` and `"{herald}/fringe/{k}"`.
pub fn sample_outcome(
    outcome: &ExperimentOutcome,
    trials: u64,
    seed: u64,
) -> Result<(Option<CountRecord>, Vec<CountRecord>), DetectionError> {
    let h = outcome.field.herald.which.label();
    let diagonal = outcome
        .diagonal
        .as_ref()
        .map(|jp| sample_counts(jp, trials, rng::derive_seed(seed, &format!("{h}/diagonal"))))
        .transpose()?;
    let fringe = outcome
        .fringe
        .iter()
        .enumerate()
        .map(|(k, (phi, jp))| {
            let mut r = sample_counts(jp, trials, rng::derive_seed(seed, &format!("{h}/fringe/{k}")))?;
            r.phase = Some(*phi);
            Ok(r)
        })
        .collect::<Result<Vec<_>, DetectionError>>()?;
    Ok((diagonal, fringe))
}
