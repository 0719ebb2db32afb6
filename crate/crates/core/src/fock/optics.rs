use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::local::{conjugate_local, kraus_local};
use super::{DensityOperator, FockError, ModeRegister, C64};

/// Passive linear-optics elements and the attenuation channel.
///
/// Beam splitters follow the real convention `a → √T a + √(1−T) b`,
/// `b → √(1−T) a − √T b`; interferometric phases live in explicit
/// [`LinearOpticsElement::Phase`] elements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearOpticsElement {
    BeamSplitter { transmittance: f64, i: usize, j: usize },
    Phase { phi: f64, mode: usize },
    Loss { eta: f64, mode: usize },
    /// Average over a Gaussian-distributed phase of standard deviation `sigma`.
    Dephasing { sigma: f64, mode: usize },
}

impl LinearOpticsElement {
    pub fn validate(&self, reg: &ModeRegister) -> Result<(), FockError> {
        match *self {
            Self::BeamSplitter { transmittance, i, j } => {
                unit_interval("transmittance", transmittance)?;
                reg.check_mode(i)?;
                reg.check_mode(j)?;
                if i == j {
                    return Err(FockError::SameMode(i));
                }
            }
            Self::Phase { mode, .. } => reg.check_mode(mode)?,
            Self::Loss { eta, mode } => {
                unit_interval("eta", eta)?;
                reg.check_mode(mode)?;
            }
            Self::Dephasing { sigma, mode } => {
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(FockError::OutOfUnitInterval { name: "sigma", value: sigma });
                }
                reg.check_mode(mode)?;
            }
        }
        Ok(())
    }

    /// Applies the element to an arbitrary operator on `reg` (linear in `m`).
    pub fn apply_matrix(
        &self,
        reg: &ModeRegister,
        m: &DMatrix<C64>,
    ) -> Result<DMatrix<C64>, FockError> {
        self.validate(reg)?;
        match *self {
            Self::BeamSplitter { transmittance, i, j } => {
                let u = beamsplitter_unitary(reg, transmittance, i, j)?;
                let mut out = m.clone();
                conjugate_local(reg, &mut out, &u, &[i, j])?;
                Ok(out)
            }
            Self::Phase { phi, mode } => {
                let p = phase_operator(reg, phi);
                let mut out = m.clone();
                conjugate_local(reg, &mut out, &p, &[mode])?;
                Ok(out)
            }
            Self::Loss { eta, mode } => {
                if eta == 1.0 {
                    return Ok(m.clone());
                }
                kraus_local(reg, m, &loss_kraus_operators(reg.cutoff(), eta)?, &[mode])
            }
            Self::Dephasing { sigma, mode } => {
                let mut out = m.clone();
                if sigma == 0.0 {
                    return Ok(out);
                }
                for c in 0..m.ncols() {
                    let nc = reg.occupation(c, mode) as f64;
                    for r in 0..m.nrows() {
                        let dn = reg.occupation(r, mode) as f64 - nc;
                        out[(r, c)] *= (-0.5 * sigma * sigma * dn * dn).exp();
                    }
                }
                Ok(out)
            }
        }
    }
}

fn unit_interval(name: &'static str, value: f64) -> Result<(), FockError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(FockError::OutOfUnitInterval { name, value })
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// `diag(e^{i n φ})` on one mode.
pub(crate) fn phase_operator(reg: &ModeRegister, phi: f64) -> DMatrix<C64> {
    DMatrix::from_fn(reg.levels(), reg.levels(), |r, c| {
        if r == c {
            C64::from_polar(1.0, phi * r as f64)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Kraus operators `A_k = Σ_n √(C(n,k) η^(n−k) (1−η)^k) |n−k⟩⟨n|` of the
/// single-mode attenuation channel (beam splitter to a traced vacuum mode).
pub fn loss_kraus_operators(cutoff: usize, eta: f64) -> Result<Vec<DMatrix<C64>>, FockError> {
    unit_interval("eta", eta)?;
    let levels = cutoff + 1;
    Ok((0..levels)
        .map(|k| {
            let mut a = DMatrix::zeros(levels, levels);
            for n in k..levels {
                let w = binomial(n, k) * eta.powi((n - k) as i32) * (1.0 - eta).powi(k as i32);
                a[(n - k, n)] = C64::new(w.sqrt(), 0.0);
            }
            a
        })
        .collect())
}

/// Two-mode beam-splitter unitary on the local space of `(i, j)`, local
/// index `n_i * levels + n_j`.
///
/// Total-photon blocks with `N ≤ cutoff` are exact. Blocks with `N > cutoff`
/// are only partially representable; there the matrix is the exponential of
/// the truncated generator followed by the parity on mode `j`, which keeps
/// the operator unitary on the truncated space.
pub fn beamsplitter_unitary(
    reg: &ModeRegister,
    transmittance: f64,
    i: usize,
    j: usize,
) -> Result<DMatrix<C64>, FockError> {
    unit_interval("transmittance", transmittance)?;
    reg.check_mode(i)?;
    reg.check_mode(j)?;
    if i == j {
        return Err(FockError::SameMode(i));
    }
    let cutoff = reg.cutoff();
    let levels = reg.levels();
    let t = transmittance.sqrt();
    let r = (1.0 - transmittance).sqrt();
    let mut u = DMatrix::zeros(levels * levels, levels * levels);
    let idx = |a: usize, b: usize| a * levels + b;

    for total in 0..=2 * cutoff {
        let lo = total.saturating_sub(cutoff);
        let hi = total.min(cutoff);
        if total <= cutoff {
            for n in 0..=total {
                let m = total - n;
                let norm = (factorial(n) * factorial(m)).sqrt();
                for p in 0..=total {
                    let mut amp = 0.0;
                    for a in 0..=n.min(p) {
                        let b = p - a;
                        if b > m {
                            continue;
                        }
                        amp += binomial(n, a)
                            * binomial(m, b)
                            * t.powi(a as i32)
                            * r.powi((n - a + b) as i32)
                            * (-t).powi((m - b) as i32);
                    }
                    amp *= (factorial(p) * factorial(total - p)).sqrt() / norm;
                    u[(idx(p, total - p), idx(n, m))] = C64::new(amp, 0.0);
                }
            }
        } else {
            let size = hi - lo + 1;
            let theta = r.atan2(t);
            let mut g = DMatrix::<f64>::zeros(size, size);
            for k in lo..=hi {
                let col = k - lo;
                if k < hi {
                    g[(col + 1, col)] += (((k + 1) * (total - k)) as f64).sqrt();
                }
                if k > lo {
                    g[(col - 1, col)] -= ((k * (total - k + 1)) as f64).sqrt();
                }
            }
            let block = (g * theta).exp();
            for k in lo..=hi {
                for k2 in lo..=hi {
                    let parity = if (total - k2) % 2 == 0 { 1.0 } else { -1.0 };
                    u[(idx(k2, total - k2), idx(k, total - k))] =
                        C64::new(parity * block[(k2 - lo, k - lo)], 0.0);
                }
            }
        }
    }
    Ok(u)
}

/// Unitary conjugation by the beam splitter on modes `i`, `j`.
pub fn apply_beamsplitter(
    rho: &DensityOperator,
    transmittance: f64,
    i: usize,
    j: usize,
) -> Result<DensityOperator, FockError> {
    rho.apply(&LinearOpticsElement::BeamSplitter { transmittance, i, j })
}

/// Conjugation by `diag(e^{i n φ})` on `mode`.
pub fn apply_phase(rho: &DensityOperator, phi: f64, mode: usize) -> Result<DensityOperator, FockError> {
    rho.apply(&LinearOpticsElement::Phase { phi, mode })
}

/// Attenuation channel of transmission `eta` on `mode`.
pub fn apply_loss(rho: &DensityOperator, eta: f64, mode: usize) -> Result<DensityOperator, FockError> {
    rho.apply(&LinearOpticsElement::Loss { eta, mode })
}

/// Gaussian phase average of width `sigma` on `mode`.
pub fn apply_dephasing(
    rho: &DensityOperator,
    sigma: f64,
    mode: usize,
) -> Result<DensityOperator, FockError> {
    rho.apply(&LinearOpticsElement::Dephasing { sigma, mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::PureState;

    fn reg(n: usize, c: usize) -> ModeRegister {
        ModeRegister::new(n, c).unwrap()
    }

    #[test]
    fn unit_transmittance_is_parity_on_second_mode() {
        let r = reg(2, 3);
        let u = beamsplitter_unitary(&r, 1.0, 0, 1).unwrap();
        let parity = DMatrix::from_fn(16, 16, |i, j| {
            let sign = if (i % 4) % 2 == 0 { 1.0 } else { -1.0 };
            C64::new(if i == j { sign } else { 0.0 }, 0.0)
        });
        assert!((u - parity).norm() < 1e-12);
    }

    #[test]
    fn single_photon_balanced_split() {
        let r = reg(2, 2);
        let rho = DensityOperator::fock(r, &[1, 0]).unwrap();
        let out = apply_beamsplitter(&rho, 0.5, 0, 1).unwrap();
        assert!((out.population(&[1, 0]) - 0.5).abs() < 1e-12);
        assert!((out.population(&[0, 1]) - 0.5).abs() < 1e-12);
        assert!((out.element(&[1, 0], &[0, 1]).norm() - 0.5).abs() < 1e-12);
    }

    /// `exp(θ(a†b − b†a))` on the full truncated two-mode space by Taylor
    /// series, followed by the parity on `b`.
    fn series_oracle(cutoff: usize, t: f64) -> DMatrix<C64> {
        let levels = cutoff + 1;
        let dim = levels * levels;
        let mut a = DMatrix::<f64>::zeros(levels, levels);
        for n in 1..levels {
            a[(n - 1, n)] = (n as f64).sqrt();
        }
        let id = DMatrix::<f64>::identity(levels, levels);
        let a1 = a.kronecker(&id);
        let b1 = id.kronecker(&a);
        let g = (a1.transpose() * &b1 - b1.transpose() * &a1) * (1.0 - t).sqrt().atan2(t.sqrt());
        let mut term = DMatrix::<f64>::identity(dim, dim);
        let mut sum = term.clone();
        for k in 1..80 {
            term = &term * &g / k as f64;
            sum += &term;
        }
        let parity = DMatrix::from_fn(dim, dim, |r, c| {
            if r == c && (r % levels) % 2 == 1 { -1.0 } else if r == c { 1.0 } else { 0.0 }
        });
        (parity * sum).map(|x| C64::new(x, 0.0))
    }

    #[test]
    fn matches_truncated_generator_series() {
        for cutoff in 1..=4 {
            for &t in &[0.0, 0.13, 0.5, 0.85 / 1.85, 0.77, 1.0] {
                let u = beamsplitter_unitary(&reg(2, cutoff), t, 0, 1).unwrap();
                let oracle = series_oracle(cutoff, t);
                assert!((&u - oracle).norm() < 1e-10, "cutoff {cutoff} t {t}");
                let dim = u.nrows();
                assert!((u.adjoint() * &u - DMatrix::<C64>::identity(dim, dim)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn hong_ou_mandel_dip() {
        let r = reg(2, 2);
        let rho = DensityOperator::fock(r, &[1, 1]).unwrap();
        let out = apply_beamsplitter(&rho, 0.5, 0, 1).unwrap();
        assert!(out.population(&[1, 1]) < 1e-12);
        assert!((out.population(&[2, 0]) - 0.5).abs() < 1e-12);
        assert!((out.population(&[0, 2]) - 0.5).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn preserves_photon_number_within_cutoff(t in 0.0f64..=1.0, cutoff in 1usize..=4) {
            let r = reg(2, cutoff);
            let u = beamsplitter_unitary(&r, t, 0, 1).unwrap();
            let levels = cutoff + 1;
            for col in 0..u.ncols() {
                for row in 0..u.nrows() {
                    let n_in = col / levels + col % levels;
                    let n_out = row / levels + row % levels;
                    if n_in != n_out {
                        proptest::prop_assert!(u[(row, col)].norm() < 1e-14);
                    }
                }
            }
        }

        #[test]
        fn loss_composes_multiplicatively(
            e1 in 0.0f64..=1.0,
            e2 in 0.0f64..=1.0,
            seed in proptest::collection::vec(-1.0f64..1.0, 32),
        ) {
            let r = reg(1, 3);
            let mut g = DMatrix::<C64>::zeros(4, 4);
            for (k, x) in seed.chunks(2).enumerate() {
                g[(k / 4, k % 4)] = C64::new(x[0], x[1]);
            }
            let m = &g * g.adjoint();
            let tr = m.trace().re.max(1e-9);
            let rho = DensityOperator::new(r, m / C64::new(tr, 0.0)).unwrap();
            let two = apply_loss(&apply_loss(&rho, e1, 0).unwrap(), e2, 0).unwrap();
            let one = apply_loss(&rho, e1 * e2, 0).unwrap();
            proptest::prop_assert!((two.matrix() - one.matrix()).norm() < 1e-12);
        }

        #[test]
        fn channels_return_valid_states(
            t in 0.0f64..=1.0,
            eta in 0.0f64..=1.0,
            phi in -7.0f64..7.0,
            cutoff in 2usize..=4,
        ) {
            let r = reg(2, cutoff);
            let mut v = nalgebra::DVector::<C64>::zeros(r.dim());
            for i in 0..r.dim() {
                v[i] = C64::new(1.0 + i as f64, (i as f64 * 0.7).sin());
            }
            let v = &v / C64::new(v.norm(), 0.0);
            let rho = PureState::new(r, v).unwrap().to_density();
            let out = rho
                .apply_all(&[
                    LinearOpticsElement::Phase { phi, mode: 0 },
                    LinearOpticsElement::BeamSplitter { transmittance: t, i: 0, j: 1 },
                    LinearOpticsElement::Loss { eta, mode: 1 },
                    LinearOpticsElement::Dephasing { sigma: 0.3, mode: 0 },
                ])
                .unwrap();
            proptest::prop_assert!(out.validate().is_ok());
        }
    }

    #[test]
    fn beamsplitter_is_involution_and_unitary() {
        let r = reg(2, 3);
        let u = beamsplitter_unitary(&r, 0.37, 0, 1).unwrap();
        let uu = &u * &u;
        assert!((u.adjoint() * &u - DMatrix::<C64>::identity(16, 16)).norm() < 1e-10);
        assert!((uu.adjoint() * &uu - DMatrix::<C64>::identity(16, 16)).norm() < 1e-10);
        // exact identity on the representable blocks
        for n in 0..=3 {
            for m in 0..=(3 - n) {
                let col = n * 4 + m;
                for row in 0..16 {
                    let expected = if row == col { 1.0 } else { 0.0 };
                    assert!((uu[(row, col)].re - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn phase_group_property_and_sign_flip() {
        let r = reg(1, 2);
        let mut v = nalgebra::DVector::zeros(3);
        v[0] = C64::new(1.0 / 2f64.sqrt(), 0.0);
        v[1] = C64::new(1.0 / 2f64.sqrt(), 0.0);
        let rho = PureState::new(r, v).unwrap().to_density();
        let flipped = apply_phase(&rho, std::f64::consts::PI, 0).unwrap();
        assert!((flipped.element(&[0], &[1]) + rho.element(&[0], &[1])).norm() < 1e-12);
        assert!((flipped.population(&[1]) - 0.5).abs() < 1e-12);
        let half = std::f64::consts::FRAC_PI_2;
        let twice = apply_phase(&apply_phase(&rho, half, 0).unwrap(), half, 0).unwrap();
        assert!((twice.matrix() - flipped.matrix()).norm() < 1e-12);
        let same = apply_phase(&rho, 0.0, 0).unwrap();
        assert!((same.matrix() - rho.matrix()).norm() < 1e-15);
    }

    #[test]
    fn single_photon_loss() {
        let r = reg(1, 3);
        let rho = DensityOperator::fock(r, &[1]).unwrap();
        let out = apply_loss(&rho, 0.3, 0).unwrap();
        assert!((out.population(&[1]) - 0.3).abs() < 1e-12);
        assert!((out.population(&[0]) - 0.7).abs() < 1e-12);
        assert!((out.trace() - 1.0).abs() < 1e-12);
        let id = apply_loss(&rho, 1.0, 0).unwrap();
        assert!((id.matrix() - rho.matrix()).norm() < 1e-15);
        assert!(matches!(
            apply_loss(&rho, 1.2, 0),
            Err(FockError::OutOfUnitInterval { .. })
        ));
    }

    #[test]
    fn kraus_completeness() {
        for &eta in &[0.0, 0.25, 0.9] {
            let ks = loss_kraus_operators(3, eta).unwrap();
            let sum = ks.iter().fold(DMatrix::<C64>::zeros(4, 4), |acc, k| acc + k.adjoint() * k);
            assert!((sum - DMatrix::<C64>::identity(4, 4)).norm() < 1e-12);
        }
    }

    #[test]
    fn usage_errors() {
        let rho = DensityOperator::vacuum(reg(2, 2));
        assert_eq!(apply_beamsplitter(&rho, 0.5, 1, 1).unwrap_err(), FockError::SameMode(1));
        assert!(matches!(
            apply_phase(&rho, 0.1, 2),
            Err(FockError::ModeOutOfRange { .. })
        ));
    }

    #[test]
    fn dephasing_scales_coherences() {
        let r = reg(1, 2);
        let v = nalgebra::DVector::from_vec(vec![
            C64::new(0.6, 0.0),
            C64::new(0.0, 0.64f64.sqrt()),
            C64::new(0.0, 0.0),
        ]);
        let rho = PureState::new(r, v).unwrap().to_density();
        let out = apply_dephasing(&rho, 0.4, 0).unwrap();
        let ratio = out.element(&[0], &[1]).norm() / rho.element(&[0], &[1]).norm();
        assert!((ratio - (-0.08f64).exp()).abs() < 1e-12);
    }
}
