use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A measured efficiency and its standard uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Efficiency {
    pub value: f64,
    #[serde(default)]
    pub error: f64,
}

impl Efficiency {
    pub const fn new(value: f64, error: f64) -> Self {
        Self { value, error }
    }

    pub const fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }
}

/// Reference planes along a field-2 path, from the ensemble outward.
///
/// `Z2` is the ensemble output, `Z1` follows the filter cell, `Z0` is the
/// detector plane corrected for detector efficiency, and `Detector` is the
/// uncorrected plane where counts are recorded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Z2,
    Z1,
    Z0,
    Detector,
}

impl Plane {
    pub const ALL: [Plane; 4] = [Plane::Detector, Plane::Z0, Plane::Z1, Plane::Z2];
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Plane::Z2 => "z2",
            Plane::Z1 => "z1",
            Plane::Z0 => "z0",
            Plane::Detector => "detector",
        })
    }
}

impl FromStr for Plane {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "z2" => Ok(Plane::Z2),
            "z1" => Ok(Plane::Z1),
            "z0" => Ok(Plane::Z0),
            "detector" | "det" => Ok(Plane::Detector),
            other => Err(format!("unknown plane {other:?}")),
        }
    }
}

/// Field-2 path components from one ensemble to its detector(s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathBudget {
    /// α_fc
    pub filter_cell: Efficiency,
    /// α_c
    pub fiber_coupling: Efficiency,
    /// α_f
    pub filter_1064: Efficiency,
    /// α_APD
    pub detector: Efficiency,
}

impl PathBudget {
    pub fn components(&self) -> [Efficiency; 4] {
        [self.filter_cell, self.fiber_coupling, self.filter_1064, self.detector]
    }

    /// Indices into [`PathBudget::components`] lying between two planes.
    pub fn segment_indices(upstream: Plane, downstream: Plane) -> std::ops::Range<usize> {
        let pos = |p: Plane| match p {
            Plane::Z2 => 0,
            Plane::Z1 => 1,
            Plane::Z0 => 3,
            Plane::Detector => 4,
        };
        let (a, b) = (pos(upstream), pos(downstream));
        a.min(b)..a.max(b)
    }

    /// Transmission between two planes (order-insensitive).
    pub fn segment(&self, upstream: Plane, downstream: Plane) -> f64 {
        let c = self.components();
        Self::segment_indices(upstream, downstream).map(|i| c[i].value).product()
    }

    /// Relative standard error of [`PathBudget::segment`], components
    /// combined in quadrature.
    pub fn segment_relative_error(&self, upstream: Plane, downstream: Plane) -> f64 {
        let c = self.components();
        Self::segment_indices(upstream, downstream)
            .map(|i| (c[i].error / c[i].value).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn total(&self) -> f64 {
        self.segment(Plane::Z2, Plane::Detector)
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, e) in ["filter_cell", "fiber_coupling", "filter_1064", "detector"]
            .iter()
            .zip(self.components())
        {
            if !(e.value > 0.0 && e.value <= 1.0) {
                return Err(format!("{name}: efficiency {} outside (0, 1]", e.value));
            }
            if !(e.error >= 0.0) {
                return Err(format!("{name}: negative uncertainty {}", e.error));
            }
        }
        Ok(())
    }
}

/// Efficiency budget of both field-2 paths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelBudget {
    #[serde(rename = "L")]
    pub left: PathBudget,
    #[serde(rename = "R")]
    pub right: PathBudget,
}

impl ChannelBudget {
    /// The measured component list, each ±0.02.
    pub fn paper() -> Self {
        let e = |v| Efficiency::new(v, 0.02);
        Self {
            left: PathBudget {
                filter_cell: e(0.80),
                fiber_coupling: e(0.70),
                filter_1064: e(0.70),
                detector: e(0.32),
            },
            right: PathBudget {
                filter_cell: e(0.80),
                fiber_coupling: e(0.65),
                filter_1064: e(0.70),
                detector: e(0.40),
            },
        }
    }

    /// Lossless budget.
    pub fn unit() -> Self {
        let e = Efficiency::exact(1.0);
        let p = PathBudget { filter_cell: e, fiber_coupling: e, filter_1064: e, detector: e };
        Self { left: p, right: p }
    }

    /// `(α_L, α_R)` between two planes.
    pub fn segment(&self, a: Plane, b: Plane) -> (f64, f64) {
        (self.left.segment(a, b), self.right.segment(a, b))
    }

    pub fn totals(&self) -> (f64, f64) {
        (self.left.total(), self.right.total())
    }

    pub fn validate(&self) -> Result<(), String> {
        self.left.validate().map_err(|e| format!("L.{e}"))?;
        self.right.validate().map_err(|e| format!("R.{e}"))
    }
}

impl Default for ChannelBudget {
    fn default() -> Self {
        Self::paper()
    }
}
