use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::diagonal::DiagonalEstimate;
use super::restricted::{effects, I00, I01, I02, I10, I11};
use super::TomographyError;
use crate::fock::C64;
use crate::layout::{EfficiencyModel, Setting};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoherenceMode {
    /// `|d| = V (p10 + p01) / 2`.
    Simplified,
    /// Exact inversion of the fringe-layout forward model.
    FullInversion,
}

impl std::str::FromStr for CoherenceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "simplified" => Ok(Self::Simplified),
            "full" | "full-inversion" => Ok(Self::FullInversion),
            _ => Err(format!("unknown coherence mode {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceEstimate {
    pub d_abs: f64,
    pub sigma: f64,
    pub mode: CoherenceMode,
    /// `√(p01 p10)`, the largest `|d|` compatible with positivity.
    pub bound: f64,
    /// `|d|` exceeds the bound by more than 3σ.
    pub positivity_violation: bool,
}

/// Arm A (D2a) and arm B (D2b or D2c) POVM elements at phase `φ`.
fn arm_effects(eff: &EfficiencyModel, phi: f64) -> Result<[DMatrix<C64>; 2], TomographyError> {
    let mut a = DMatrix::zeros(6, 6);
    let mut b = DMatrix::zeros(6, 6);
    for (p, e) in effects(eff, Setting::Fringe { phi })? {
        if p.clicked(0) {
            a += &e;
        }
        if p.clicked(1) || p.clicked(2) {
            b += &e;
        }
    }
    Ok([a, b])
}

/// Per-arm `(|c|, w)`: the d-term is `2 Re(d c(φ))` and the baseline is
/// `Σ w_u p_u` over the diagonal parameters.
fn arm_terms(eff: &EfficiencyModel) -> Result<[(f64, [f64; 5]); 2], TomographyError> {
    let arms = arm_effects(eff, 0.0)?;
    Ok(arms.map(|e| {
        let w = [I00, I01, I10, I11, I02].map(|u| e[(u, u)].re);
        (e[(I01, I10)].norm(), w)
    }))
}

fn baseline(w: &[f64; 5], p: &[f64; 5]) -> f64 {
    w.iter().zip(p).map(|(w, p)| w * p).sum()
}

/// Coherence magnitude from the mean arm visibility `v ± sigma_v` and the
/// diagonal estimates.
///
/// In full-inversion mode the visibility of each arm is exactly linear in
/// `|d|`, `V_arm = 2|d||c_arm| / b_arm`, with `c_arm` and the baseline
/// `b_arm` including the two-photon terms and the actual splitters and
/// efficiencies, so the mean visibility is inverted in closed form.
pub fn estimate_coherence(
    v: f64,
    sigma_v: f64,
    diag: &DiagonalEstimate,
    eff: &EfficiencyModel,
    mode: CoherenceMode,
) -> Result<CoherenceEstimate, TomographyError> {
    let p = diag.values();
    let cov = &diag.covariance;
    let (d_abs, var) = match mode {
        CoherenceMode::Simplified => {
            let s = p[1] + p[2];
            let var_s = cov[1][1] + cov[2][2] + 2.0 * cov[1][2];
            (0.5 * v * s, (0.5 * s * sigma_v).powi(2) + (0.5 * v).powi(2) * var_s)
        }
        CoherenceMode::FullInversion => {
            eff.validate()?;
            let terms = arm_terms(eff)?;
            let slope: f64 = terms.iter().map(|(c, w)| c / baseline(w, &p)).sum();
            if !(slope.is_finite() && slope > 0.0) {
                return Err(TomographyError::Singular("fringe arms carry no single-photon interference".into()));
            }
            let d = v / slope;
            // ∂d/∂p_u = (v / S²) Σ_arm |c| w_u / b²
            let grad: [f64; 5] = std::array::from_fn(|u| {
                let ds: f64 = terms.iter().map(|(c, w)| -c * w[u] / baseline(w, &p).powi(2)).sum();
                -v / (slope * slope) * ds
            });
            let mut var_p = 0.0;
            for r in 0..5 {
                for c in 0..5 {
                    var_p += grad[r] * cov[r][c] * grad[c];
                }
            }
            (d, (sigma_v / slope).powi(2) + var_p)
        }
    };
    let sigma = var.max(0.0).sqrt();
    let bound = (p[1].max(0.0) * p[2].max(0.0)).sqrt();
    Ok(CoherenceEstimate {
        d_abs,
        sigma,
        mode,
        bound,
        positivity_violation: d_abs > bound + 3.0 * sigma + 1e-15,
    })
}

/// Phase of `d` that puts the arm-A fringe maximum at `phi0`.
pub fn coherence_phase(phi0: f64, eff: &EfficiencyModel) -> Result<f64, TomographyError> {
    let [a, _] = arm_effects(eff, phi0)?;
    Ok(-a[(I01, I10)].arg())
}
