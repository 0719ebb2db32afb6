//! The two field-2 measurement arrangements.
//!
//! Modes are `(2_L, 2_R, c)` where `c` is the vacuum input of the splitter
//! in front of D2b/D2c. In the diagonal arrangement D2a watches `2_L` and
//! the 2_R field is split between D2b and D2c. In the fringe arrangement a
//! phase `φ` is applied to `2_L`, the two fields are combined on BS2, and
//! the two outputs go to D2a and to the D2b/D2c splitter respectively.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::detection::{
    aggregate_split_detector, click_probabilities, pattern_weights_of_matrix,
    AggregatedProbabilities, ClickPattern, DetectionError, DetectorSpec, JointProbabilities,
};
use crate::entanglement::{ChannelBudget, Plane};
use crate::fock::{embed_vacuum_matrix, DensityOperator, FockError, LinearOpticsElement, ModeRegister, C64};

pub const DETECTOR_IDS: [&str; 3] = ["D2a", "D2b", "D2c"];

fn half() -> f64 {
    0.5
}

/// Efficiencies between the plane a state is referenced to and the clicks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyModel {
    /// Path transmission of 2_L up to its detector (or BS2).
    pub eta_l: f64,
    pub eta_r: f64,
    pub eta_2a: f64,
    pub eta_2b: f64,
    pub eta_2c: f64,
    /// Fraction of the 2_R analysis-splitter input sent to D2b; 1 means no splitter.
    #[serde(default = "half")]
    pub split: f64,
    /// Transmittance of BS2 in the fringe arrangement.
    #[serde(default = "half")]
    pub bs2_t: f64,
    #[serde(default)]
    pub dark_count: f64,
}

impl Default for EfficiencyModel {
    fn default() -> Self {
        Self::unit()
    }
}

impl EfficiencyModel {
    /// Unit efficiencies with balanced splitters.
    pub fn unit() -> Self {
        Self {
            eta_l: 1.0,
            eta_r: 1.0,
            eta_2a: 1.0,
            eta_2b: 1.0,
            eta_2c: 1.0,
            split: 0.5,
            bs2_t: 0.5,
            dark_count: 0.0,
        }
    }

    /// Efficiencies seen by a state referenced at `plane`.
    pub fn from_budget(budget: &ChannelBudget, plane: Plane) -> Self {
        if plane == Plane::Detector {
            return Self::unit();
        }
        let (eta_l, eta_r) = budget.segment(plane, Plane::Z0);
        let (det_l, det_r) = (budget.left.detector.value, budget.right.detector.value);
        Self { eta_l, eta_r, eta_2a: det_l, eta_2b: det_r, eta_2c: det_r, ..Self::unit() }
    }

    pub fn validate(&self) -> Result<(), FockError> {
        for (name, v) in [
            ("eta_l", self.eta_l),
            ("eta_r", self.eta_r),
            ("eta_2a", self.eta_2a),
            ("eta_2b", self.eta_2b),
            ("eta_2c", self.eta_2c),
            ("split", self.split),
            ("bs2_t", self.bs2_t),
            ("dark_count", self.dark_count),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(FockError::OutOfUnitInterval { name, value: v });
            }
        }
        Ok(())
    }

    pub fn detectors(&self) -> [DetectorSpec; 3] {
        let d = |k: usize, eta| DetectorSpec::new(DETECTOR_IDS[k], eta, k).with_dark_count(self.dark_count);
        [d(0, self.eta_2a), d(1, self.eta_2b), d(2, self.eta_2c)]
    }
}

/// Which arrangement is in place.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum Setting {
    Diagonal,
    Fringe { phi: f64 },
}

/// Optical elements on `(2_L, 2_R, c)` for a setting.
pub fn network(eff: &EfficiencyModel, setting: Setting) -> Vec<LinearOpticsElement> {
    use LinearOpticsElement::*;
    let mut v = vec![Loss { eta: eff.eta_l, mode: 0 }, Loss { eta: eff.eta_r, mode: 1 }];
    if let Setting::Fringe { phi } = setting {
        v.push(Phase { phi, mode: 0 });
        v.push(BeamSplitter { transmittance: eff.bs2_t, i: 0, j: 1 });
    }
    if eff.split < 1.0 {
        v.push(BeamSplitter { transmittance: eff.split, i: 1, j: 2 });
    }
    v
}

fn check_two_mode(reg: &ModeRegister) -> Result<(), DetectionError> {
    if reg.n_modes() != 2 {
        return Err(FockError::RegisterMismatch(format!(
            "field-2 analysis needs 2 modes, got {}",
            reg.n_modes()
        ))
        .into());
    }
    Ok(())
}

/// Click probabilities of D2a, D2b, D2c for a two-mode field state.
pub fn layout_probabilities(
    rho: &DensityOperator,
    eff: &EfficiencyModel,
    setting: Setting,
) -> Result<JointProbabilities, DetectionError> {
    check_two_mode(rho.register())?;
    eff.validate()?;
    let full = rho.with_vacuum_modes(1)?.apply_all(&network(eff, setting))?;
    click_probabilities(&full, &eff.detectors())
}

/// `Tr(Π_pattern N(m))` for an arbitrary operator `m` on `(2_L, 2_R)`,
/// where `N` is the setting's optical network.
pub fn layout_response(
    reg: &ModeRegister,
    m: &DMatrix<C64>,
    eff: &EfficiencyModel,
    setting: Setting,
) -> Result<BTreeMap<ClickPattern, C64>, DetectionError> {
    check_two_mode(reg)?;
    eff.validate()?;
    let (big, mut mm) = embed_vacuum_matrix(reg, m, 1)?;
    for e in network(eff, setting) {
        mm = e.apply_matrix(&big, &mm)?;
    }
    pattern_weights_of_matrix(&big, &mm, &eff.detectors())
}

/// Probabilities of the classes `Q_mn`: `m` = D2a clicked, `n` = number of
/// D2b/D2c detectors that clicked.
pub fn classes(probs: &JointProbabilities) -> Result<AggregatedProbabilities, DetectionError> {
    aggregate_split_detector(probs, [1, 2])
}

/// `(m, n)` class of a D2a/D2b/D2c pattern.
pub fn class_of(pattern: &ClickPattern) -> (usize, usize) {
    (
        usize::from(pattern.clicked(0)),
        usize::from(pattern.clicked(1)) + usize::from(pattern.clicked(2)),
    )
}
