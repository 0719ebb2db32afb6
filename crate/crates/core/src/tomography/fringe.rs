use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::diagonal::canonical_tally;
use super::TomographyError;
use crate::detection::{CountRecord, JointProbabilities};

/// Counts of the two BS2 output arms at one analysis phase. Arm A is D2a,
/// arm B is D2b or D2c. Counts may be fractional when they are expected
/// values rather than a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub phi: f64,
    pub trials: f64,
    pub arm_a: f64,
    pub arm_b: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub points: Vec<FringePoint>,
}

fn arm_a(bits: &crate::detection::ClickPattern) -> bool {
    bits.clicked(0)
}

fn arm_b(bits: &crate::detection::ClickPattern) -> bool {
    bits.clicked(1) || bits.clicked(2)
}

impl FringeScan {
    /// One point per record; every record needs a phase.
    pub fn from_records(records: &[CountRecord]) -> Result<Self, TomographyError> {
        let mut points = Vec::with_capacity(records.len());
        for r in records {
            let phi = r.phase.ok_or_else(|| TomographyError::NoData("fringe record without a phase".into()))?;
            let tally = canonical_tally(r)?;
            let count = |f: fn(&crate::detection::ClickPattern) -> bool| {
                tally.iter().filter(|(p, _)| f(p)).map(|(_, c)| *c).sum::<u64>() as f64
            };
            points.push(FringePoint { phi, trials: r.trials as f64, arm_a: count(arm_a), arm_b: count(arm_b) });
        }
        Ok(Self { points })
    }

    /// Expected counts for `trials` trials at each phase.
    pub fn from_probabilities(points: &[(f64, JointProbabilities)], trials: f64) -> Self {
        let points = points
            .iter()
            .map(|(phi, jp)| {
                let sum = |f: fn(&crate::detection::ClickPattern) -> bool| {
                    jp.probabilities.iter().filter(|(p, _)| f(p)).map(|(_, v)| v).sum::<f64>()
                };
                FringePoint { phi: *phi, trials, arm_a: trials * sum(arm_a), arm_b: trials * sum(arm_b) }
            })
            .collect();
        Self { points }
    }

    /// Distinct phases modulo 2π, ascending in `[0, 2π)`.
    pub fn distinct_phases(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.points.iter().map(|p| p.phi.rem_euclid(TAU)).collect();
        v.sort_by(f64::total_cmp);
        let mut out: Vec<f64> = Vec::new();
        for x in v {
            let dup = out.iter().any(|&y| {
                let d = (x - y).abs();
                d.min(TAU - d) < 1e-9
            });
            if !dup {
                out.push(x);
            }
        }
        out
    }

    /// At least five distinct phases covering a full period: the raw phase
    /// span must reach `2π (1 − 1/n)` for `n` distinct phases, which admits
    /// evenly spaced grids with or without the repeated end point.
    pub fn check_well_posed(&self) -> Result<(), TomographyError> {
        if self.points.iter().any(|p| !(p.trials > 0.0) || !p.phi.is_finite()) {
            return Err(TomographyError::IllPosed("points need finite phases and positive trials".into()));
        }
        let n = self.distinct_phases().len();
        if n < 5 {
            return Err(TomographyError::IllPosed(format!("{n} distinct phases, need at least 5")));
        }
        let lo = self.points.iter().map(|p| p.phi).fold(f64::INFINITY, f64::min);
        let hi = self.points.iter().map(|p| p.phi).fold(f64::NEG_INFINITY, f64::max);
        let need = TAU * (1.0 - 1.0 / n as f64) - 1e-9;
        if hi - lo < need {
            return Err(TomographyError::IllPosed(format!("phases span {:.3} rad, need {need:.3}", hi - lo)));
        }
        Ok(())
    }
}

/// `y(φ) = A (1 + V cos(φ − φ₀))` for one arm, `y` being the click
/// probability per trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmFit {
    pub baseline: f64,
    pub visibility: f64,
    /// `φ₀` in `(−π, π]`.
    pub phase: f64,
    pub sigma_baseline: f64,
    pub sigma_visibility: f64,
    pub sigma_phase: f64,
    pub chi2: f64,
    pub dof: usize,
}

impl ArmFit {
    pub fn predict(&self, phi: f64) -> f64 {
        self.baseline * (1.0 + self.visibility * (phi - self.phase).cos())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub arm_a: ArmFit,
    pub arm_b: ArmFit,
    /// Mean of the two arm visibilities.
    pub visibility: f64,
    pub sigma_visibility: f64,
    /// Phase offset of arm A.
    pub phase: f64,
    pub flags: Vec<String>,
}

fn basis(phi: f64) -> Vector3<f64> {
    Vector3::new(1.0, phi.cos(), phi.sin())
}

/// Weighted least squares in the linear form `A + B cos φ + C sin φ`, with
/// binomial weights re-evaluated at the fitted curve.
fn fit_arm(points: &[(f64, f64, f64)]) -> Result<ArmFit, TomographyError> {
    // (φ, trials, y)
    let solve = |weights: &dyn Fn(f64, f64, f64) -> f64| -> Result<(Vector3<f64>, Matrix3<f64>), TomographyError> {
        let mut ata = Matrix3::zeros();
        let mut atb = Vector3::zeros();
        for &(phi, n, y) in points {
            let w = weights(phi, n, y);
            let x = basis(phi);
            ata += w * x * x.transpose();
            atb += w * y * x;
        }
        let cov = ata
            .try_inverse()
            .ok_or_else(|| TomographyError::DataQuality("fringe normal equations are singular".into()))?;
        Ok((cov * atb, cov))
    };
    let mean = points.iter().map(|p| p.2).sum::<f64>() / points.len() as f64;
    // one expected count is the smallest variance credited to any point
    let var = |y: f64, n: f64| (y * (1.0 - y)).max(1.0 / n) / n;
    let (mut beta, mut cov) = solve(&|_, n, _| 1.0 / var(mean, n))?;
    for _ in 0..3 {
        let b = beta;
        (beta, cov) = solve(&|phi, n, _| 1.0 / var(b.dot(&basis(phi)).clamp(0.0, 1.0), n))?;
    }
    if !beta.iter().all(|v| v.is_finite()) {
        return Err(TomographyError::DataQuality("fringe fit did not converge".into()));
    }
    let (a, b, c) = (beta[0], beta[1], beta[2]);
    if !(a > 0.0) {
        return Err(TomographyError::DataQuality(format!("fringe baseline {a:e} is not positive")));
    }
    let r = b.hypot(c);
    let v = r / a;
    let phase = c.atan2(b);
    let grad_v = if r > 0.0 { Vector3::new(-v / a, b / (a * r), c / (a * r)) } else { Vector3::new(0.0, 1.0 / a, 0.0) };
    let grad_phi = if r > 0.0 { Vector3::new(0.0, -c / (r * r), b / (r * r)) } else { Vector3::zeros() };
    let chi2 = points
        .iter()
        .map(|&(phi, n, y)| {
            let m = beta.dot(&basis(phi));
            (y - m).powi(2) / var(m.clamp(0.0, 1.0), n)
        })
        .sum();
    Ok(ArmFit {
        baseline: a,
        visibility: v,
        phase: if phase <= -PI { phase + TAU } else { phase },
        sigma_baseline: cov[(0, 0)].max(0.0).sqrt(),
        sigma_visibility: (grad_v.transpose() * cov * grad_v)[0].max(0.0).sqrt(),
        sigma_phase: if r > 0.0 { (grad_phi.transpose() * cov * grad_phi)[0].max(0.0).sqrt() } else { PI },
        chi2,
        dof: points.len().saturating_sub(3),
    })
}

/// Fits both arms of a well-posed scan.
///
/// Errors when an arm visibility exceeds one by more than 3σ.
pub fn fit_fringe(scan: &FringeScan) -> Result<FringeFit, TomographyError> {
    scan.check_well_posed()?;
    let pts = |f: fn(&FringePoint) -> f64| -> Vec<(f64, f64, f64)> {
        scan.points.iter().map(|p| (p.phi, p.trials, f(p) / p.trials)).collect()
    };
    let arm_a = fit_arm(&pts(|p| p.arm_a))?;
    let arm_b = fit_arm(&pts(|p| p.arm_b))?;
    let mut flags = Vec::new();
    for (name, arm) in [("A", &arm_a), ("B", &arm_b)] {
        if arm.visibility > 1.0 + 3.0 * arm.sigma_visibility + 1e-9 {
            return Err(TomographyError::DataQuality(format!(
                "arm {name} visibility {:.4} exceeds 1 by more than 3σ (σ = {:.4})",
                arm.visibility, arm.sigma_visibility
            )));
        }
        if arm.visibility > 1.0 {
            flags.push(format!("arm {name} visibility {:.4} above 1 within noise", arm.visibility));
        }
    }
    Ok(FringeFit {
        visibility: 0.5 * (arm_a.visibility + arm_b.visibility),
        sigma_visibility: 0.5 * arm_a.sigma_visibility.hypot(arm_b.sigma_visibility),
        phase: arm_a.phase,
        arm_a,
        arm_b,
        flags,
    })
}

/// `a − b` wrapped into `(−π, π]`.
pub fn phase_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI { d - TAU } else { d }
}
