use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// One atomic ensemble: pair-excitation probability per write pulse and
/// retrieval efficiency into its field-2 mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleParams {
    pub chi: f64,
    pub xi: f64,
}

impl EnsembleParams {
    pub fn validate(&self, name: &str) -> Result<(), ProtocolError> {
        if !(0.0..1.0).contains(&self.chi) {
            return Err(ProtocolError::param(&format!("{name}.chi"), format!("{} not in [0, 1)", self.chi)));
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(ProtocolError::param(&format!("{name}.xi"), format!("{} not in [0, 1]", self.xi)));
        }
        Ok(())
    }
}

/// Field-1 and field-2 interferometer parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferometerParams {
    /// Transmittance of BS1.
    pub bs1_t: f64,
    /// Write-path phase (radians), applied to 1_L.
    #[serde(default)]
    pub eta1: f64,
    /// Read-path phase (radians), applied to 2_L.
    #[serde(default)]
    pub eta2: f64,
    /// Mode-overlap amplitude of 1_L and 1_R at BS1.
    #[serde(default = "one")]
    pub overlap: f64,
    /// Standard deviation of the per-trial phase noise on η1 + η2.
    #[serde(default)]
    pub phase_jitter_sigma: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for InterferometerParams {
    fn default() -> Self {
        Self { bs1_t: 0.5, eta1: 0.0, eta2: 0.0, overlap: 1.0, phase_jitter_sigma: 0.0 }
    }
}

impl InterferometerParams {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        for (name, v) in [("bs1_t", self.bs1_t), ("overlap", self.overlap)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ProtocolError::param(name, format!("{v} not in [0, 1]")));
            }
        }
        for (name, v) in [("eta1", self.eta1), ("eta2", self.eta2)] {
            if !v.is_finite() {
                return Err(ProtocolError::param(name, "not finite"));
            }
        }
        if !(self.phase_jitter_sigma >= 0.0 && self.phase_jitter_sigma.is_finite()) {
            return Err(ProtocolError::param("phase_jitter_sigma", "must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Herald {
    D1a,
    D1b,
}

impl Herald {
    pub const BOTH: [Herald; 2] = [Herald::D1a, Herald::D1b];

    pub fn label(&self) -> &'static str {
        match self {
            Herald::D1a => "d1a",
            Herald::D1b => "d1b",
        }
    }
}

impl fmt::Display for Herald {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Herald {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "d1a" => Ok(Herald::D1a),
            "d1b" => Ok(Herald::D1b),
            other => Err(format!("unknown herald {other:?}")),
        }
    }
}

/// Which field-1 detector announces success; `exclusive` also requires
/// silence at the other one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeraldChoice {
    pub which: Herald,
    #[serde(default = "yes")]
    pub exclusive: bool,
}

fn yes() -> bool {
    true
}

impl HeraldChoice {
    pub fn exclusive(which: Herald) -> Self {
        Self { which, exclusive: true }
    }
}

/// Field-1 detector efficiencies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeraldDetectors {
    pub d1a: f64,
    pub d1b: f64,
    pub dark_count: f64,
}

impl Default for HeraldDetectors {
    fn default() -> Self {
        Self { d1a: 1.0, d1b: 1.0, dark_count: 0.0 }
    }
}
