use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::DetectionError;
use crate::fock::ModeRegister;

/// Click/no-click detector.
///
/// A detector may watch several modes (for example two polarizations on one
/// photodiode); it fires on photons in any of them. Its no-click element is
/// `(1 − p_dark) Π_m (1 − η)^(n_m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub id: String,
    pub efficiency: f64,
    pub modes: Vec<usize>,
    #[serde(default)]
    pub dark_count: f64,
}

impl DetectorSpec {
    pub fn new(id: impl Into<String>, efficiency: f64, mode: usize) -> Self {
        Self { id: id.into(), efficiency, modes: vec![mode], dark_count: 0.0 }
    }

    pub fn watching(id: impl Into<String>, efficiency: f64, modes: &[usize]) -> Self {
        Self { id: id.into(), efficiency, modes: modes.to_vec(), dark_count: 0.0 }
    }

    pub fn with_dark_count(mut self, p: f64) -> Self {
        self.dark_count = p;
        self
    }

    /// No-click probability given the photon numbers of the whole register.
    pub fn no_click_weight(&self, occupations: &[usize]) -> f64 {
        let n: usize = self.modes.iter().map(|&m| occupations[m]).sum();
        (1.0 - self.dark_count) * (1.0 - self.efficiency).powi(n as i32)
    }

    fn validate(&self, reg: &ModeRegister) -> Result<(), DetectionError> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(DetectionError::Efficiency { id: self.id.clone(), value: self.efficiency });
        }
        if !(0.0..=1.0).contains(&self.dark_count) {
            return Err(DetectionError::DarkCount { id: self.id.clone(), value: self.dark_count });
        }
        if self.modes.is_empty() {
            return Err(DetectionError::NoModes { id: self.id.clone() });
        }
        for &m in &self.modes {
            reg.check_mode(m)?;
        }
        Ok(())
    }
}

/// Checks ranges and that no mode is claimed twice.
pub fn validate_detectors(reg: &ModeRegister, detectors: &[DetectorSpec]) -> Result<(), DetectionError> {
    if detectors.is_empty() {
        return Err(DetectionError::NoDetectors);
    }
    let mut seen = vec![false; reg.n_modes()];
    for d in detectors {
        d.validate(reg)?;
        for &m in &d.modes {
            if std::mem::replace(&mut seen[m], true) {
                return Err(DetectionError::DuplicateMode { mode: m });
            }
        }
    }
    Ok(())
}

/// Outcome of a set of detectors, in declaration order. Displays and
/// serialises as a bit string such as `"101"`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClickPattern(Vec<bool>);

impl ClickPattern {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// Pattern number `index` of `len` detectors, first detector most significant.
    pub fn from_index(index: usize, len: usize) -> Self {
        Self((0..len).map(|k| (index >> (len - 1 - k)) & 1 == 1).collect())
    }

    pub fn all(len: usize) -> impl Iterator<Item = ClickPattern> {
        (0..1usize << len).map(move |i| Self::from_index(i, len))
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn clicked(&self, k: usize) -> bool {
        self.0[k]
    }

    pub fn n_clicks(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }
}

impl fmt::Display for ClickPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for ClickPattern {
    type Err = DetectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(DetectionError::BadPattern(s.to_string()));
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(DetectionError::BadPattern(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl Serialize for ClickPattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClickPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
