use serde::{Deserialize, Serialize};

use super::EntanglementError;

/// Joint click statistics of the two field-2 modes: probabilities of a
/// photon in 2_L only, 2_R only, and both, with standard errors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub p10: f64,
    pub p01: f64,
    pub p11: f64,
    #[serde(default)]
    pub sigma: [f64; 3],
}

/// Fields 1 and 2 of one ensemble: `(p1, p2, p12)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub p1: f64,
    pub p2: f64,
    pub p12: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    /// `p11 / (p10 p01)` of the heralded state.
    pub h_c2: f64,
    pub sigma_h_c2: f64,
    /// `h_c2 < 1`, required for `C > 0`.
    pub h_c2_below_one: bool,
    /// Same ratio without heralding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_nc2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_h_nc2: Option<f64>,
    /// `p12 / (p1 p2)` per ensemble.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g12_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g12_r: Option<f64>,
}

fn ratio(s: &PairStats) -> Result<(f64, f64), EntanglementError> {
    if !(s.p10 > 0.0) {
        return Err(EntanglementError::ZeroDenominator("p10"));
    }
    if !(s.p01 > 0.0) {
        return Err(EntanglementError::ZeroDenominator("p01"));
    }
    let h = s.p11 / (s.p10 * s.p01);
    let rel = (s.sigma[0] / s.p10).powi(2) + (s.sigma[1] / s.p01).powi(2);
    let abs = (s.sigma[2] / (s.p10 * s.p01)).powi(2) + h * h * rel;
    Ok((h, abs.sqrt()))
}

fn g12(e: &EnsembleStats) -> Result<f64, EntanglementError> {
    if !(e.p1 > 0.0 && e.p2 > 0.0) {
        return Err(EntanglementError::ZeroDenominator("p1 p2"));
    }
    Ok(e.p12 / (e.p1 * e.p2))
}

pub fn witnesses(
    heralded: &PairStats,
    unheralded: Option<&PairStats>,
    ensembles: Option<[EnsembleStats; 2]>,
) -> Result<WitnessReport, EntanglementError> {
    let (h, s) = ratio(heralded)?;
    let nc = unheralded.map(ratio).transpose()?;
    let (g_l, g_r) = match ensembles {
        Some([l, r]) => (Some(g12(&l)?), Some(g12(&r)?)),
        None => (None, None),
    };
    Ok(WitnessReport {
        h_c2: h,
        sigma_h_c2: s,
        h_c2_below_one: h < 1.0,
        h_nc2: nc.map(|x| x.0),
        sigma_h_nc2: nc.map(|x| x.1),
        g12_l: g_l,
        g12_r: g_r,
    })
}
