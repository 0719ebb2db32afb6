use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::TomographyError;
use crate::detection::{ClickPattern, DetectionError};
use crate::fock::{DensityOperator, FockError, ModeRegister, C64};
use crate::layout::{layout_response, EfficiencyModel, Setting};

/// Two-photon basis of `(2_L, 2_R)` in the order used for 6×6 matrices.
pub const BASIS: [(usize, usize); 6] = [(0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (2, 0)];

pub(crate) const I00: usize = 0;
pub(crate) const I01: usize = 1;
pub(crate) const I10: usize = 2;
pub(crate) const I11: usize = 3;
pub(crate) const I02: usize = 4;
pub(crate) const I20: usize = 5;

/// Two modes truncated at two photons each.
pub fn field_register() -> ModeRegister {
    ModeRegister::new(2, 2).expect("small register")
}

/// Embeds a 6×6 matrix over [`BASIS`] into the `(2_L, 2_R)` register.
pub fn embed(m6: &DMatrix<C64>) -> DMatrix<C64> {
    let reg = field_register();
    let idx: Vec<usize> = BASIS.iter().map(|&(a, b)| reg.index_of(&[a, b]).unwrap()).collect();
    let mut out = DMatrix::zeros(reg.dim(), reg.dim());
    for (r, &ir) in idx.iter().enumerate() {
        for (c, &ic) in idx.iter().enumerate() {
            out[(ir, ic)] = m6[(r, c)];
        }
    }
    out
}

/// Matrix elements of a two-mode state over [`BASIS`]. Entries outside the
/// register's cutoff are zero.
pub fn project(rho: &DensityOperator) -> Result<DMatrix<C64>, TomographyError> {
    let reg = rho.register();
    if reg.n_modes() != 2 {
        return Err(FockError::RegisterMismatch(format!("two field modes expected, got {}", reg.n_modes())).into());
    }
    let mut out = DMatrix::zeros(6, 6);
    for (r, &(a, b)) in BASIS.iter().enumerate() {
        for (c, &(x, y)) in BASIS.iter().enumerate() {
            if reg.index_of(&[a, b]).is_some() && reg.index_of(&[x, y]).is_some() {
                out[(r, c)] = rho.element(&[a, b], &[x, y]);
            }
        }
    }
    Ok(out)
}

/// POVM elements of one setting on [`BASIS`], keyed by D2a/D2b/D2c
/// pattern: `p(pattern) = Tr(ρ E)`.
pub fn effects(
    eff: &EfficiencyModel,
    setting: Setting,
) -> Result<BTreeMap<ClickPattern, DMatrix<C64>>, DetectionError> {
    let reg = field_register();
    let mut out: BTreeMap<ClickPattern, DMatrix<C64>> =
        ClickPattern::all(3).map(|p| (p, DMatrix::zeros(6, 6))).collect();
    for u in 0..6 {
        for v in u..6 {
            // passive optics and Fock-diagonal POVMs only link equal photon numbers
            let (nu, nv) = (BASIS[u].0 + BASIS[u].1, BASIS[v].0 + BASIS[v].1);
            if nu != nv {
                continue;
            }
            let mut unit = DMatrix::<C64>::zeros(6, 6);
            unit[(u, v)] = C64::new(1.0, 0.0);
            let resp = layout_response(&reg, &embed(&unit), eff, setting)?;
            for (p, x) in resp {
                let e = out.get_mut(&p).expect("all patterns present");
                // Tr(|u⟩⟨v| E) = E[v, u]
                e[(v, u)] = x;
                e[(u, v)] = x.conj();
            }
        }
    }
    Ok(out)
}

/// The `{00, 01, 10, 11}` block of a field state in the form
///
/// ```text
/// ρ̃ = (1/P̃) [ p00 |00⟩⟨00| + p01 |01⟩⟨01| + p10 |10⟩⟨10| + p11 |11⟩⟨11|
///             + d |10⟩⟨01| + d* |01⟩⟨10| ]
/// ```
///
/// The stored populations and `d` are the unnormalised matrix elements, so
/// `p00 + p01 + p10 + p11 = P̃`. Coherences between different total photon
/// numbers are not part of the form; neither measurement layout sees them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictedDensity {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    /// `⟨10|ρ|01⟩`.
    pub d: C64,
    #[serde(rename = "P_tilde")]
    pub p_tilde: f64,
}

impl RestrictedDensity {
    /// From unnormalised populations and coherence; `P̃` is their sum.
    pub fn new(p00: f64, p01: f64, p10: f64, p11: f64, d: C64) -> Result<Self, TomographyError> {
        let p_tilde = p00 + p01 + p10 + p11;
        if !(p_tilde > 0.0) {
            return Err(TomographyError::ZeroRetained(p_tilde));
        }
        Ok(Self { p00, p01, p10, p11, d, p_tilde })
    }

    /// Populations of ρ̃ in the order `p00, p01, p10, p11`.
    pub fn normalized(&self) -> [f64; 4] {
        let t = self.p_tilde;
        [self.p00 / t, self.p01 / t, self.p10 / t, self.p11 / t]
    }

    pub fn d_abs(&self) -> f64 {
        self.d.norm()
    }

    /// ρ̃ as a 4×4 matrix on `{00, 01, 10, 11}`.
    pub fn rho_tilde(&self) -> DMatrix<C64> {
        let t = self.p_tilde;
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = C64::new(self.p00 / t, 0.0);
        m[(1, 1)] = C64::new(self.p01 / t, 0.0);
        m[(2, 2)] = C64::new(self.p10 / t, 0.0);
        m[(3, 3)] = C64::new(self.p11 / t, 0.0);
        m[(2, 1)] = self.d / t;
        m[(1, 2)] = self.d.conj() / t;
        m
    }

    /// Whether `|d| ≤ √(p01 p10)` within `tol`, i.e. ρ̃ is positive.
    pub fn is_positive(&self, tol: f64) -> bool {
        [self.p00, self.p01, self.p10, self.p11].iter().all(|&p| p >= -tol)
            && self.d_abs() <= (self.p01.max(0.0) * self.p10.max(0.0)).sqrt() + tol
    }

    /// The same parameters with `d` divided by its phase.
    pub fn with_real_d(&self) -> Self {
        Self { d: C64::new(self.d_abs(), 0.0), ..*self }
    }
}

/// Extracts the restricted form of a two-mode field state.
pub fn restrict(rho: &DensityOperator) -> Result<RestrictedDensity, TomographyError> {
    let m = project(rho)?;
    restrict_matrix(&m)
}

/// [`restrict`] for a 6×6 matrix over [`BASIS`].
pub fn restrict_matrix(m6: &DMatrix<C64>) -> Result<RestrictedDensity, TomographyError> {
    RestrictedDensity::new(m6[(I00, I00)].re, m6[(I01, I01)].re, m6[(I10, I10)].re, m6[(I11, I11)].re, m6[(I10, I01)])
}

/// The 6×6 state with the restricted parameters and two-photon populations
/// `p02`, `p20` added; the total is left unnormalised.
pub fn restricted_state(rd: &RestrictedDensity, p02: f64, p20: f64) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(6, 6);
    for (i, p) in [(I00, rd.p00), (I01, rd.p01), (I10, rd.p10), (I11, rd.p11), (I02, p02), (I20, p20)] {
        m[(i, i)] = C64::new(p, 0.0);
    }
    m[(I10, I01)] = rd.d;
    m[(I01, I10)] = rd.d.conj();
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::PureState;

    #[test]
    fn block_state_is_unchanged() {
        let reg = field_register();
        let mut v = nalgebra::DVector::zeros(9);
        v[reg.index_of(&[1, 0]).unwrap()] = C64::new(0.6, 0.0);
        v[reg.index_of(&[0, 1]).unwrap()] = C64::new(0.0, 0.8);
        let rho = PureState::new(reg, v).unwrap().to_density();
        let rd = restrict(&rho).unwrap();
        assert!((rd.p_tilde - 1.0).abs() < 1e-14);
        assert!((rd.d - C64::new(0.0, -0.48)).norm() < 1e-14);
        assert!((rd.d_abs() - (rd.p10 * rd.p01).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn two_photon_weight_reduces_retained_probability() {
        let mut m = DMatrix::<C64>::zeros(6, 6);
        for (i, p) in [(I00, 0.8), (I01, 0.05), (I10, 0.05), (I02, 0.05), (I20, 0.05)] {
            m[(i, i)] = C64::new(p, 0.0);
        }
        let rd = restrict_matrix(&m).unwrap();
        assert!((rd.p_tilde - 0.9).abs() < 1e-14);
        let n = rd.normalized();
        assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((n[0] - 0.8 / 0.9).abs() < 1e-14);
    }

    #[test]
    fn empty_block_is_an_error() {
        let mut m = DMatrix::<C64>::zeros(6, 6);
        m[(I02, I02)] = C64::new(1.0, 0.0);
        assert!(matches!(restrict_matrix(&m), Err(TomographyError::ZeroRetained(_))));
    }

    #[test]
    fn effects_reproduce_layout_probabilities() {
        let eff = EfficiencyModel { eta_l: 0.8, eta_2b: 0.6, split: 0.45, dark_count: 1e-4, ..EfficiencyModel::unit() };
        let reg = field_register();
        let mut v = nalgebra::DVector::zeros(9);
        for (occ, a) in [([0, 0], 0.8), ([1, 0], 0.4), ([0, 1], -0.3), ([1, 1], 0.2), ([0, 2], 0.1), ([2, 0], 0.2)] {
            v[reg.index_of(&occ).unwrap()] = C64::new(a, 0.1 * a);
        }
        let norm = v.norm();
        let rho = PureState::new(reg, v.unscale(norm)).unwrap().to_density();
        let m6 = project(&rho).unwrap();
        for setting in [Setting::Diagonal, Setting::Fringe { phi: 1.1 }] {
            let jp = crate::layout::layout_probabilities(&rho, &eff, setting).unwrap();
            let mut total = DMatrix::<C64>::zeros(6, 6);
            for (p, e) in effects(&eff, setting).unwrap() {
                assert!(((&m6 * &e).trace().re - jp.get(&p)).abs() < 1e-12);
                total += e;
            }
            assert!((total - DMatrix::<C64>::identity(6, 6)).norm() < 1e-12);
        }
    }
}
