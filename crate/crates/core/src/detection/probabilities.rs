use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::pattern::validate_detectors;
use super::{ClickPattern, DetectionError, DetectorSpec};
use crate::fock::{
    normal_ordered_expectation, FockState, ModeFactor, ModeRegister, NormalOrderedOp, C64,
};

/// Probability of every click pattern of an ordered detector set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointProbabilities {
    pub detectors: Vec<String>,
    pub probabilities: BTreeMap<ClickPattern, f64>,
}

impl JointProbabilities {
    pub fn new(
        detectors: Vec<String>,
        probabilities: BTreeMap<ClickPattern, f64>,
    ) -> Result<Self, DetectionError> {
        for (p, v) in &probabilities {
            if p.len() != detectors.len() {
                return Err(DetectionError::PatternLength { expected: detectors.len(), got: p.len() });
            }
            if !(-1e-12..=1.0 + 1e-12).contains(v) {
                return Err(DetectionError::InvalidProbabilities(format!("{p} has {v}")));
            }
        }
        let sum: f64 = probabilities.values().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(DetectionError::InvalidProbabilities(format!("sum {sum}")));
        }
        Ok(Self { detectors, probabilities })
    }

    pub fn get(&self, pattern: &ClickPattern) -> f64 {
        self.probabilities.get(pattern).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probabilities.values().sum()
    }

    pub fn index_of(&self, id: &str) -> Result<usize, DetectionError> {
        self.detectors
            .iter()
            .position(|d| d == id)
            .ok_or_else(|| DetectionError::UnknownDetector(id.to_string()))
    }

    /// Probability that detector `k` clicks.
    pub fn click_probability(&self, k: usize) -> f64 {
        self.probabilities
            .iter()
            .filter(|(p, _)| p.clicked(k))
            .map(|(_, v)| v)
            .sum()
    }

    /// Distribution over a subset of the detectors, in the order given.
    pub fn marginal(&self, keep: &[usize]) -> JointProbabilities {
        let mut out = BTreeMap::new();
        for (p, v) in &self.probabilities {
            let key = ClickPattern::new(keep.iter().map(|&k| p.clicked(k)).collect());
            *out.entry(key).or_insert(0.0) += v;
        }
        JointProbabilities {
            detectors: keep.iter().map(|&k| self.detectors[k].clone()).collect(),
            probabilities: out,
        }
    }
}

/// Exact click-pattern probabilities on `state`.
///
/// Each pattern with click set `C` and no-click set `N` is
/// `Σ_{S⊆C} (−1)^|S| ⟨:Π_{d∈N∪S} e^{−η_d n_d}:⟩` (scaled by dark-count
/// factors), evaluated as a normally ordered expectation.
pub fn click_probabilities<S: FockState>(
    state: &S,
    detectors: &[DetectorSpec],
) -> Result<JointProbabilities, DetectionError> {
    validate_detectors(state.register(), detectors)?;
    let k = detectors.len();
    let mut probabilities = BTreeMap::new();
    for pattern in ClickPattern::all(k) {
        let clicks: Vec<usize> = (0..k).filter(|&d| pattern.clicked(d)).collect();
        let mut op = NormalOrderedOp::new();
        for subset in 0..1usize << clicks.len() {
            let mut coefficient = if subset.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            let mut factors = Vec::new();
            for (d, det) in detectors.iter().enumerate() {
                let in_product = match clicks.iter().position(|&c| c == d) {
                    Some(pos) => subset >> pos & 1 == 1,
                    None => true,
                };
                if in_product {
                    coefficient *= 1.0 - det.dark_count;
                    for &m in &det.modes {
                        factors.push((m, ModeFactor::NoClick { efficiency: det.efficiency }));
                    }
                }
            }
            op = op.term(coefficient, factors);
        }
        let p = normal_ordered_expectation(state, &op)?;
        probabilities.insert(pattern, p.max(0.0));
    }
    Ok(JointProbabilities {
        detectors: detectors.iter().map(|d| d.id.clone()).collect(),
        probabilities,
    })
}

/// `Tr(Π_pattern m)` for every pattern, for an arbitrary (not necessarily
/// Hermitian) operator `m` on `reg`. Each diagonal element is weighted by the
/// product of per-detector click/no-click probabilities of its basis state.
pub fn pattern_weights_of_matrix(
    reg: &ModeRegister,
    m: &DMatrix<C64>,
    detectors: &[DetectorSpec],
) -> Result<BTreeMap<ClickPattern, C64>, DetectionError> {
    validate_detectors(reg, detectors)?;
    let mut out: BTreeMap<ClickPattern, C64> =
        ClickPattern::all(detectors.len()).map(|p| (p, C64::new(0.0, 0.0))).collect();
    for i in 0..reg.dim() {
        let x = m[(i, i)];
        if x == C64::new(0.0, 0.0) {
            continue;
        }
        let occ = reg.occupations(i);
        let q: Vec<f64> = detectors.iter().map(|d| d.no_click_weight(&occ)).collect();
        for (p, acc) in out.iter_mut() {
            let w: f64 = q
                .iter()
                .enumerate()
                .map(|(k, q)| if p.clicked(k) { 1.0 - q } else { *q })
                .product();
            *acc += x * w;
        }
    }
    Ok(out)
}

/// Joint distribution with two detectors fused into one photon-count class:
/// `n = 0` neither clicked, `1` exactly one, `2` both.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregatedProbabilities {
    /// Detectors kept as individual click bits.
    pub detectors: Vec<String>,
    /// Keyed by (kept pattern, class).
    pub classes: BTreeMap<(ClickPattern, usize), f64>,
}

impl AggregatedProbabilities {
    pub fn get(&self, kept: &ClickPattern, n: usize) -> f64 {
        self.classes.get(&(kept.clone(), n)).copied().unwrap_or(0.0)
    }

    /// Marginal over the kept pattern.
    pub fn class(&self, n: usize) -> f64 {
        self.classes.iter().filter(|((_, c), _)| *c == n).map(|(_, v)| v).sum()
    }
}

/// Fuses detectors `pair[0]` and `pair[1]` of `probs` into a count class.
pub fn aggregate_split_detector(
    probs: &JointProbabilities,
    pair: [usize; 2],
) -> Result<AggregatedProbabilities, DetectionError> {
    let k = probs.detectors.len();
    if pair[0] >= k || pair[1] >= k || pair[0] == pair[1] {
        return Err(DetectionError::UnknownDetector(format!("{pair:?}")));
    }
    let kept: Vec<usize> = (0..k).filter(|d| !pair.contains(d)).collect();
    let mut classes = BTreeMap::new();
    for (p, v) in &probs.probabilities {
        let key = ClickPattern::new(kept.iter().map(|&d| p.clicked(d)).collect());
        let n = usize::from(p.clicked(pair[0])) + usize::from(p.clicked(pair[1]));
        *classes.entry((key, n)).or_insert(0.0) += v;
    }
    Ok(AggregatedProbabilities {
        detectors: kept.iter().map(|&d| probs.detectors[d].clone()).collect(),
        classes,
    })
}
