//! Experiment configuration (JSON, versioned, unknown keys rejected).

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entanglement::ChannelBudget;
use crate::protocol::{EnsembleParams, HeraldChoice, HeraldDetectors, InterferometerParams};

pub const SCHEMA_VERSION: u32 = 1;

/// A configuration problem located by its JSON field path.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensembles {
    #[serde(rename = "L")]
    pub left: EnsembleParams,
    #[serde(rename = "R")]
    pub right: EnsembleParams,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

/// Detector efficiencies and the field-2 analysis splitters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    #[serde(default = "one")]
    pub d1a: f64,
    #[serde(default = "one")]
    pub d1b: f64,
    pub d2a: f64,
    pub d2b: f64,
    pub d2c: f64,
    #[serde(default)]
    pub dark_count: f64,
    /// Fraction of 2_R sent to D2b.
    #[serde(default = "half")]
    pub split: f64,
    /// Transmittance of BS2.
    #[serde(default = "half")]
    pub bs2_t: f64,
}

impl DetectorConfig {
    pub fn herald(&self) -> HeraldDetectors {
        HeraldDetectors { d1a: self.d1a, d1b: self.d1b, dark_count: self.dark_count }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutChoice {
    Diagonal,
    Fringe,
    Both,
}

impl LayoutChoice {
    pub fn diagonal(&self) -> bool {
        matches!(self, Self::Diagonal | Self::Both)
    }

    pub fn fringe(&self) -> bool {
        matches!(self, Self::Fringe | Self::Both)
    }
}

/// Analysis-phase grid: explicit values, or `points` evenly spaced over
/// `[0, 2π]` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
}

impl Default for FringeGrid {
    fn default() -> Self {
        Self { points: Some(13), phi: None }
    }
}

impl FringeGrid {
    pub fn phis(&self) -> Vec<f64> {
        if let Some(phi) = &self.phi {
            return phi.clone();
        }
        let n = self.points.unwrap_or(13);
        if n == 1 {
            return vec![0.0];
        }
        (0..n).map(|k| TAU * k as f64 / (n - 1) as f64).collect()
    }
}

/// Parameter replacements applied by a named window preset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensembles: Option<Ensembles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interferometer: Option<InterferometerParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelBudget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detectors: Option<DetectorConfig>,
}

fn default_cutoff() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub ensembles: Ensembles,
    pub interferometer: InterferometerParams,
    pub channel: ChannelBudget,
    pub detectors: DetectorConfig,
    pub herald: HeraldChoice,
    pub layout: LayoutChoice,
    #[serde(default)]
    pub fringe: FringeGrid,
    pub trials: u64,
    pub seed: u64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub windows: BTreeMap<String, WindowOverride>,
    /// Free-form annotations, ignored by the engine.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, Vec<String>>,
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the offending field path.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::at(if path == "." { "$".to_string() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Lossless, balanced, weakly excited configuration.
    pub fn ideal() -> Self {
        let e = EnsembleParams { chi: 1e-3, xi: 1.0 };
        Self {
            schema_version: SCHEMA_VERSION,
            ensembles: Ensembles { left: e, right: e },
            interferometer: InterferometerParams::default(),
            channel: ChannelBudget::unit(),
            detectors: DetectorConfig {
                d1a: 1.0,
                d1b: 1.0,
                d2a: 1.0,
                d2b: 1.0,
                d2c: 1.0,
                dark_count: 0.0,
                split: 0.5,
                bs2_t: 0.5,
            },
            herald: HeraldChoice::exclusive(crate::protocol::Herald::D1a),
            layout: LayoutChoice::Both,
            fringe: FringeGrid::default(),
            trials: 1_000_000,
            seed: 1,
            cutoff: 3,
            windows: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    /// Copy with the named window preset applied.
    pub fn with_window(&self, name: &str) -> Result<Self, ConfigError> {
        let Some(w) = self.windows.get(name) else {
            return Err(ConfigError::at(format!("windows.{name}"), "no such window preset"));
        };
        let mut out = self.clone();
        if let Some(e) = w.ensembles {
            out.ensembles = e;
        }
        if let Some(i) = w.interferometer {
            out.interferometer = i;
        }
        if let Some(c) = w.channel {
            out.channel = c;
        }
        if let Some(d) = w.detectors {
            out.detectors = d;
        }
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::at(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        let prefixed = |prefix: &str, e: crate::protocol::ProtocolError| match e {
            crate::protocol::ProtocolError::Parameter { name, message } => {
                ConfigError::at(format!("{prefix}.{name}"), message)
            }
            other => ConfigError::at(prefix, other.to_string()),
        };
        self.ensembles.left.validate("L").map_err(|e| prefixed("ensembles", e))?;
        self.ensembles.right.validate("R").map_err(|e| prefixed("ensembles", e))?;
        self.interferometer.validate().map_err(|e| prefixed("interferometer", e))?;
        self.channel.validate().map_err(|m| ConfigError::at("channel", m))?;
        let d = &self.detectors;
        for (name, v) in [
            ("d1a", d.d1a),
            ("d1b", d.d1b),
            ("d2a", d.d2a),
            ("d2b", d.d2b),
            ("d2c", d.d2c),
            ("dark_count", d.dark_count),
            ("split", d.split),
            ("bs2_t", d.bs2_t),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::at(format!("detectors.{name}"), format!("{v} not in [0, 1]")));
            }
        }
        if self.trials == 0 {
            return Err(ConfigError::at("trials", "must be at least 1"));
        }
        if !(2..=6).contains(&self.cutoff) {
            return Err(ConfigError::at("cutoff", "must be between 2 and 6"));
        }
        let phis = self.fringe.phis();
        if phis.is_empty() || phis.iter().any(|p| !p.is_finite()) {
            return Err(ConfigError::at("fringe", "grid must be nonempty and finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_idempotent() {
        let cfg = ExperimentConfig::ideal();
        let a = cfg.to_json();
        let b = ExperimentConfig::from_json(&a).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let mut v: serde_json::Value = serde_json::from_str(&ExperimentConfig::ideal().to_json()).unwrap();
        v["ensembles"]["L"]["chii"] = 0.1.into();
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert_eq!(err.path, "ensembles.L.chii");
        assert!(err.message.contains("chii"));
        let mut v: serde_json::Value = serde_json::from_str(&ExperimentConfig::ideal().to_json()).unwrap();
        v["ensembles"]["R"]["chi"] = 1.5.into();
        let err = ExperimentConfig::from_json(&v.to_string()).unwrap_err();
        assert_eq!(err.path, "ensembles.R.chi");
    }

    #[test]
    fn default_grid_has_thirteen_points_over_a_full_turn() {
        let p = FringeGrid::default().phis();
        assert_eq!(p.len(), 13);
        assert!((p[12] - TAU).abs() < 1e-15);
    }
}
