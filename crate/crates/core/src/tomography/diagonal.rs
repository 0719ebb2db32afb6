use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::restricted::{effects, I00, I01, I02, I10, I11};
use super::TomographyError;
use crate::detection::{ClickPattern, CountRecord, DetectionError, JointProbabilities};
use crate::layout::{class_of, EfficiencyModel, Setting, DETECTOR_IDS};
use crate::rng;

/// Order of the diagonal parameters in arrays and covariance matrices.
pub const DIAGONAL_NAMES: [&str; 5] = ["p00", "p01", "p10", "p11", "p02"];
const COLUMNS: [usize; 5] = [I00, I01, I10, I11, I02];

/// Class probabilities `Q_mn` (`m` = D2a clicked, `n` = number of D2b/D2c
/// clicks) and the number of trials they were estimated from. `None`
/// trials means exact probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassData {
    pub q: [[f64; 3]; 2],
    pub trials: Option<u64>,
}

/// Positions of D2a, D2b, D2c in a record's detector list.
pub(crate) fn detector_positions(detectors: &[String]) -> Result<[usize; 3], DetectionError> {
    let mut out = [0; 3];
    for (k, id) in DETECTOR_IDS.iter().enumerate() {
        out[k] = detectors
            .iter()
            .position(|d| d == id)
            .ok_or_else(|| DetectionError::UnknownDetector(id.to_string()))?;
    }
    if detectors.len() != 3 {
        return Err(DetectionError::Integrity(format!("expected detectors {DETECTOR_IDS:?}, got {detectors:?}")));
    }
    Ok(out)
}

/// A record's patterns rewritten in D2a/D2b/D2c order.
pub(crate) fn canonical_tally(rec: &CountRecord) -> Result<Vec<(ClickPattern, u64)>, DetectionError> {
    rec.validate()?;
    let pos = detector_positions(&rec.detectors)?;
    Ok(rec
        .tally
        .iter()
        .map(|(p, &c)| (ClickPattern::new(pos.iter().map(|&k| p.clicked(k)).collect()), c))
        .collect())
}

impl ClassData {
    pub fn from_record(rec: &CountRecord) -> Result<Self, TomographyError> {
        let mut q = [[0.0; 3]; 2];
        for (p, c) in canonical_tally(rec)? {
            let (m, n) = class_of(&p);
            q[m][n] += c as f64 / rec.trials as f64;
        }
        Ok(Self { q, trials: Some(rec.trials) })
    }

    /// Exact class probabilities of a D2a/D2b/D2c distribution.
    pub fn from_probabilities(jp: &JointProbabilities) -> Result<Self, TomographyError> {
        let pos = detector_positions(&jp.detectors)?;
        let mut q = [[0.0; 3]; 2];
        for (p, &v) in &jp.probabilities {
            let canon = ClickPattern::new(pos.iter().map(|&k| p.clicked(k)).collect());
            let (m, n) = class_of(&canon);
            q[m][n] += v;
        }
        Ok(Self { q, trials: None })
    }

    pub fn validate(&self) -> Result<(), TomographyError> {
        let mut sum = 0.0;
        for v in self.q.iter().flatten() {
            if !(-1e-12..=1.0 + 1e-12).contains(v) {
                return Err(TomographyError::BadClasses(format!("Q = {v} outside [0, 1]")));
            }
            sum += v;
        }
        if sum > 1.0 + 1e-9 {
            return Err(TomographyError::BadClasses(format!("Q sums to {sum}")));
        }
        if self.trials == Some(0) {
            return Err(TomographyError::BadClasses("zero trials".into()));
        }
        Ok(())
    }

    fn vector(&self) -> DVector<f64> {
        DVector::from_iterator(6, self.q.iter().flatten().copied())
    }

    /// Multinomial covariance of the class frequencies.
    pub fn covariance(&self) -> DMatrix<f64> {
        let Some(n) = self.trials else {
            return DMatrix::zeros(6, 6);
        };
        let q = self.vector();
        (DMatrix::from_diagonal(&q) - &q * q.transpose()) / n as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalOptions {
    /// Parametric bootstrap resamples; 0 disables the cross-check.
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for DiagonalOptions {
    fn default() -> Self {
        Self { bootstrap: 200, seed: 0 }
    }
}

/// Diagonal elements of the field state with their uncertainties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalEstimate {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    pub p02: f64,
    /// First-order standard errors, in [`DIAGONAL_NAMES`] order.
    pub sigma: [f64; 5],
    /// Standard deviations over bootstrap resamples.
    pub bootstrap_sigma: Option<[f64; 5]>,
    pub covariance: [[f64; 5]; 5],
    pub flags: Vec<String>,
}

impl DiagonalEstimate {
    pub fn values(&self) -> [f64; 5] {
        [self.p00, self.p01, self.p10, self.p11, self.p02]
    }

    fn set(&mut self, k: usize, v: f64) {
        match k {
            0 => self.p00 = v,
            1 => self.p01 = v,
            2 => self.p10 = v,
            3 => self.p11 = v,
            _ => self.p02 = v,
        }
    }
}

/// `A[class][u]`: probability of class `(m, n)` (row `3m + n`) given the
/// basis population `u` of [`DIAGONAL_NAMES`].
pub fn diagonal_response(eff: &EfficiencyModel) -> Result<DMatrix<f64>, TomographyError> {
    let e = effects(eff, Setting::Diagonal)?;
    let mut a = DMatrix::zeros(6, 5);
    for (p, m) in &e {
        let (cm, cn) = class_of(p);
        for (j, &u) in COLUMNS.iter().enumerate() {
            a[(3 * cm + cn, j)] += m[(u, u)].re;
        }
    }
    Ok(a)
}

fn has_splitter(eff: &EfficiencyModel) -> bool {
    eff.split > 0.0 && eff.split < 1.0
}

/// Least-squares inverse of the identifiable columns of the forward map,
/// scattered back to all five parameters.
fn inverse_map(eff: &EfficiencyModel) -> Result<DMatrix<f64>, TomographyError> {
    let a = diagonal_response(eff)?;
    let cols: Vec<usize> = if has_splitter(eff) { (0..5).collect() } else { (0..4).collect() };
    let sub = a.select_columns(&cols);
    let svd = sub.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(TomographyError::Singular(format!("condition {:e}", smax / smin)));
    }
    let pinv = svd.pseudo_inverse(0.0).map_err(|e| TomographyError::Singular(e.to_string()))?;
    let mut out = DMatrix::zeros(5, 6);
    for (r, &c) in cols.iter().enumerate() {
        out.set_row(c, &pinv.row(r));
    }
    Ok(out)
}

fn multinomial<R: Rng>(q: &DVector<f64>, n: u64, rng: &mut R) -> DVector<f64> {
    let mut out = DVector::zeros(q.len());
    let (mut left, mut mass) = (n, 1.0f64);
    for k in 0..q.len() {
        let c = if k + 1 == q.len() {
            left
        } else if mass <= 0.0 {
            0
        } else {
            Binomial::new(left, (q[k].max(0.0) / mass).clamp(0.0, 1.0)).map(|b| b.sample(rng)).unwrap_or(0)
        };
        out[k] = c as f64 / n as f64;
        left -= c;
        mass -= q[k].max(0.0);
    }
    out
}

/// [`invert_diagonal_with`] with default options.
pub fn invert_diagonal(data: &ClassData, eff: &EfficiencyModel) -> Result<DiagonalEstimate, TomographyError> {
    invert_diagonal_with(data, eff, &DiagonalOptions::default())
}

/// Solves the diagonal-layout forward map `Q = A p` for the populations.
///
/// `p20` is held at zero: a non-resolving D2a gives it the same response
/// as `p10` up to efficiency corrections. Without the 2_R splitter `p02` is
/// likewise held at zero. Negative solutions within 3σ are clamped and
/// flagged.
pub fn invert_diagonal_with(
    data: &ClassData,
    eff: &EfficiencyModel,
    opts: &DiagonalOptions,
) -> Result<DiagonalEstimate, TomographyError> {
    data.validate()?;
    eff.validate()?;
    let pinv = inverse_map(eff)?;
    let q = data.vector();
    let x = &pinv * &q;
    let cov = &pinv * data.covariance() * pinv.transpose();
    let mut flags = vec!["p20 fixed at 0".to_string()];
    if !has_splitter(eff) {
        flags.push("p02 fixed at 0 (no 2_R splitter)".into());
    }
    let bootstrap_sigma = match data.trials {
        Some(n) if opts.bootstrap > 1 => {
            let mut rng = rng::stream(opts.seed, "tomography/diagonal-bootstrap");
            let mut sum = [0.0; 5];
            let mut sq = [0.0; 5];
            for _ in 0..opts.bootstrap {
                let xb = &pinv * multinomial(&q, n, &mut rng);
                for k in 0..5 {
                    sum[k] += xb[k];
                    sq[k] += xb[k] * xb[k];
                }
            }
            let b = opts.bootstrap as f64;
            Some(std::array::from_fn(|k| ((sq[k] - sum[k] * sum[k] / b) / (b - 1.0)).max(0.0).sqrt()))
        }
        _ => None,
    };
    let mut est = DiagonalEstimate {
        p00: x[0],
        p01: x[1],
        p10: x[2],
        p11: x[3],
        p02: x[4],
        sigma: std::array::from_fn(|k| cov[(k, k)].max(0.0).sqrt()),
        bootstrap_sigma,
        covariance: std::array::from_fn(|r| std::array::from_fn(|c| cov[(r, c)])),
        flags,
    };
    for k in 0..5 {
        let v = est.values()[k];
        if v >= 0.0 {
            continue;
        }
        let s = est.sigma[k];
        if v >= -3.0 * s || v > -1e-12 {
            est.set(k, 0.0);
            if v < -1e-12 {
                est.flags.push(format!("{} = {v:.3e} clamped to 0", DIAGONAL_NAMES[k]));
            }
        } else {
            return Err(TomographyError::Inconsistent { name: DIAGONAL_NAMES[k], value: v, sigma: s });
        }
    }
    Ok(est)
}
