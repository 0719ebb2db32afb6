use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    coherence_phase, estimate_coherence, fit_fringe, invert_diagonal_with, mle_fit_from, restricted_state,
    ClassData, CoherenceEstimate, CoherenceMode, DiagonalEstimate, DiagonalOptions, FringeFit, FringeScan,
    MeasurementModel, MleEstimate, MleOptions, RestrictedDensity, TomographyError,
};
use crate::detection::CountRecord;
use crate::fock::C64;
use crate::layout::EfficiencyModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub coherence: CoherenceMode,
    pub diagonal: DiagonalOptions,
    /// Also run the likelihood fit.
    pub mle: Option<MleOptions>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { coherence: CoherenceMode::FullInversion, diagonal: DiagonalOptions::default(), mle: None }
    }
}

/// Diagonal inversion followed by the fringe fit.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoStageEstimate {
    pub diagonal: DiagonalEstimate,
    pub fringe: FringeFit,
    pub coherence: CoherenceEstimate,
    /// `d` carries the phase implied by the fringe offset.
    pub restricted: RestrictedDensity,
    pub flags: Vec<String>,
}

impl TwoStageEstimate {
    /// Unit-trace 6×6 state with `p20 = 0`.
    pub fn state(&self) -> DMatrix<C64> {
        let m = restricted_state(&self.restricted, self.diagonal.p02.max(0.0), 0.0);
        let tr = m.trace().re;
        m / C64::new(tr, 0.0)
    }
}

/// Diagonal records (no phase) merged into one; fringe records kept.
pub fn split_records(records: &[CountRecord]) -> Result<(CountRecord, Vec<CountRecord>), TomographyError> {
    if records.is_empty() {
        return Err(TomographyError::NoData("record set is empty".into()));
    }
    let mut diagonal: Option<CountRecord> = None;
    let mut fringe = Vec::new();
    for r in records {
        r.validate()?;
        if r.phase.is_some() {
            fringe.push(r.clone());
        } else {
            diagonal = Some(match diagonal {
                None => r.clone(),
                Some(d) => d.merge(r)?,
            });
        }
    }
    let diagonal = diagonal.ok_or_else(|| TomographyError::NoData("no diagonal-layout record".into()))?;
    if fringe.is_empty() {
        return Err(TomographyError::NoData("no fringe-layout records".into()));
    }
    Ok((diagonal, fringe))
}

pub fn two_stage(
    diagonal: &CountRecord,
    fringe: &[CountRecord],
    eff: &EfficiencyModel,
    opts: &AnalysisOptions,
) -> Result<TwoStageEstimate, TomographyError> {
    let diag = invert_diagonal_with(&ClassData::from_record(diagonal)?, eff, &opts.diagonal)?;
    let fit = fit_fringe(&FringeScan::from_records(fringe)?)?;
    let coh = estimate_coherence(fit.visibility, fit.sigma_visibility, &diag, eff, opts.coherence)?;
    let d = C64::from_polar(coh.d_abs, coherence_phase(fit.phase, eff)?);
    let restricted = RestrictedDensity::new(diag.p00, diag.p01, diag.p10, diag.p11, d)?;
    let mut flags = diag.flags.clone();
    flags.extend(fit.flags.iter().cloned());
    if coh.positivity_violation {
        flags.push(format!("|d| = {:.3e} exceeds sqrt(p01 p10) = {:.3e} by more than 3 sigma", coh.d_abs, coh.bound));
    }
    Ok(TwoStageEstimate { diagonal: diag, fringe: fit, coherence: coh, restricted, flags })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Uncertainties {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    pub p02: f64,
    pub d_abs: f64,
    #[serde(rename = "P_tilde")]
    pub p_tilde: f64,
    pub visibility: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleSummary {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    pub p02: f64,
    pub p20: f64,
    pub d_abs: f64,
    #[serde(rename = "P_tilde")]
    pub p_tilde: f64,
    pub log_likelihood: f64,
    pub two_stage_log_likelihood: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    /// Observed-information standard errors.
    pub sigma: MleSigma,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleSigma {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    pub d_abs: f64,
}

/// Machine-readable outcome of the record analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    pub p02: f64,
    pub d_abs: f64,
    #[serde(rename = "P_tilde")]
    pub p_tilde: f64,
    pub visibility: f64,
    pub visibility_arms: [f64; 2],
    pub fringe_phase: f64,
    pub coherence_mode: CoherenceMode,
    pub uncertainties: Uncertainties,
    pub flags: Vec<String>,
    pub eff: EfficiencyModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mle: Option<MleSummary>,
}

impl TomographyResult {
    pub fn restricted(&self) -> RestrictedDensity {
        let p_tilde = self.p00 + self.p01 + self.p10 + self.p11;
        RestrictedDensity {
            p00: self.p00,
            p01: self.p01,
            p10: self.p10,
            p11: self.p11,
            d: C64::new(self.d_abs, 0.0),
            p_tilde,
        }
    }
}

/// Two-stage analysis of a record set, plus the likelihood fit when asked.
pub fn analyze_records(
    records: &[CountRecord],
    eff: &EfficiencyModel,
    opts: &AnalysisOptions,
) -> Result<(TomographyResult, Option<MleEstimate>), TomographyError> {
    let (diagonal, fringe) = split_records(records)?;
    let ts = two_stage(&diagonal, &fringe, eff, opts)?;
    let d = &ts.diagonal;
    let mut result = TomographyResult {
        p00: d.p00,
        p01: d.p01,
        p10: d.p10,
        p11: d.p11,
        p02: d.p02,
        d_abs: ts.coherence.d_abs,
        p_tilde: ts.restricted.p_tilde,
        visibility: ts.fringe.visibility,
        visibility_arms: [ts.fringe.arm_a.visibility, ts.fringe.arm_b.visibility],
        fringe_phase: ts.fringe.phase,
        coherence_mode: opts.coherence,
        uncertainties: Uncertainties {
            p00: d.sigma[0],
            p01: d.sigma[1],
            p10: d.sigma[2],
            p11: d.sigma[3],
            p02: d.sigma[4],
            d_abs: ts.coherence.sigma,
            p_tilde: d.sigma[4],
            visibility: ts.fringe.sigma_visibility,
        },
        flags: ts.flags.clone(),
        eff: *eff,
        mle: None,
    };
    let Some(mle_opts) = opts.mle else {
        return Ok((result, None));
    };
    let mut all = vec![diagonal];
    all.extend(fringe);
    let model = MeasurementModel::from_records(&all, eff)?;
    if model.excluded() > 0 {
        result.flags.push(format!("likelihood fit leaves out {} events beyond two photons", model.excluded()));
    }
    let ts_state = ts.state();
    let start = ts_state.clone() * C64::new(0.9, 0.0) + DMatrix::<C64>::identity(6, 6) * C64::new(0.1 / 6.0, 0.0);
    let est = mle_fit_from(&model, &start, &mle_opts)?;
    result.mle = Some(MleSummary {
        p00: est.restricted.p00,
        p01: est.restricted.p01,
        p10: est.restricted.p10,
        p11: est.restricted.p11,
        p02: est.p02,
        p20: est.p20,
        d_abs: est.restricted.d_abs(),
        p_tilde: est.restricted.p_tilde,
        log_likelihood: est.log_likelihood,
        two_stage_log_likelihood: model.log_likelihood(&ts_state),
        duality_gap: est.duality_gap,
        iterations: est.iterations,
        sigma: {
            let [p00, p01, p10, p11, d_abs] = model.restricted_sigma(&est.rho);
            MleSigma { p00, p01, p10, p11, d_abs }
        },
    });
    Ok((result, Some(est)))
}
