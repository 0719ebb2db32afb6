use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::EntanglementError;
use crate::fock::C64;
use crate::rng;
use crate::tomography::RestrictedDensity;

/// Standard errors of the restricted parameters that enter the concurrence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RestrictedSigma {
    pub p00: f64,
    pub p11: f64,
    pub d_abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcurrenceResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub herald: Option<String>,
    /// Concurrence of the normalised ρ̃.
    #[serde(rename = "C")]
    pub concurrence: f64,
    /// `P̃ C`, a lower bound on the concurrence of the untruncated state.
    pub lower_bound: f64,
    /// Entanglement of formation of ρ̃.
    #[serde(rename = "E")]
    pub eof: f64,
    /// First-order standard error of `C`.
    pub sigma: f64,
    /// Spread of `C` over Gaussian resamples of the inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_mc: Option<f64>,
}

/// `P̃ C = max(2|d| − 2√(p00 p11), 0)` on unnormalised parameters.
fn weighted(p00: f64, p11: f64, d_abs: f64) -> f64 {
    (2.0 * d_abs - 2.0 * (p00.max(0.0) * p11.max(0.0)).sqrt()).max(0.0)
}

fn binary_entropy(x: f64) -> f64 {
    let h = |p: f64| if p <= 0.0 || p >= 1.0 { 0.0 } else { -p * p.log2() };
    h(x) + h(1.0 - x)
}

/// Entanglement of formation of a two-qubit state with concurrence `c`.
pub fn entanglement_of_formation(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    binary_entropy(0.5 * (1.0 + (1.0 - c * c).sqrt()))
}

/// Concurrence of ρ̃ without uncertainties.
pub fn concurrence_restricted(rd: &RestrictedDensity) -> ConcurrenceResult {
    concurrence_with_uncertainty(rd, &RestrictedSigma::default(), 0, 0)
}

/// Concurrence with first-order error propagation, plus a Gaussian
/// resampling estimate when `samples > 0`.
pub fn concurrence_with_uncertainty(
    rd: &RestrictedDensity,
    sigma: &RestrictedSigma,
    samples: usize,
    seed: u64,
) -> ConcurrenceResult {
    let t = rd.p_tilde;
    let lb = weighted(rd.p00, rd.p11, rd.d_abs());
    let c = (lb / t).min(1.0);
    let first_order = if lb > 0.0 {
        let g00 = if rd.p00 > 0.0 { (rd.p11 / rd.p00).sqrt() } else { 0.0 };
        let g11 = if rd.p11 > 0.0 { (rd.p00 / rd.p11).sqrt() } else { 0.0 };
        ((2.0 * sigma.d_abs).powi(2) + (g00 * sigma.p00).powi(2) + (g11 * sigma.p11).powi(2)).sqrt() / t
    } else {
        0.0
    };
    let sigma_mc = (samples > 1).then(|| {
        let mut r = rng::stream(seed, "entanglement/concurrence-mc");
        let n = |m: f64, s: f64| Normal::new(m, s.max(0.0)).expect("finite");
        let (a, b, d) = (n(rd.p00, sigma.p00), n(rd.p11, sigma.p11), n(rd.d_abs(), sigma.d_abs));
        let draws: Vec<f64> = (0..samples)
            .map(|_| weighted(a.sample(&mut r), b.sample(&mut r), d.sample(&mut r).abs()) / t)
            .collect();
        let mean = draws.iter().sum::<f64>() / samples as f64;
        (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples - 1) as f64).sqrt()
    });
    ConcurrenceResult {
        herald: None,
        concurrence: c,
        lower_bound: lb,
        eof: entanglement_of_formation(c),
        sigma: first_order,
        sigma_mc,
    }
}

fn hermitian_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let e = SymmetricEigen::new(m.clone());
    let s = DMatrix::from_diagonal(&e.eigenvalues.map(|x| C64::new(x.max(0.0).sqrt(), 0.0)));
    &e.eigenvectors * s * e.eigenvectors.adjoint()
}

/// Wootters concurrence of a 4×4 state on `{00, 01, 10, 11}`.
pub fn wootters_concurrence(rho: &DMatrix<C64>) -> Result<f64, EntanglementError> {
    if rho.shape() != (4, 4) {
        return Err(EntanglementError::InvalidState(format!("shape {:?}", rho.shape())));
    }
    let herm = (rho - rho.adjoint()).norm();
    if herm > 1e-10 {
        return Err(EntanglementError::InvalidState(format!("not Hermitian ({herm:e})")));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
        return Err(EntanglementError::InvalidState(format!("trace {tr}")));
    }
    let min = SymmetricEigen::new(rho.clone()).eigenvalues.min();
    if min < -1e-9 {
        return Err(EntanglementError::InvalidState(format!("eigenvalue {min:e}")));
    }
    // σy ⊗ σy is the antidiagonal (−1, 1, 1, −1)
    let mut yy = DMatrix::<C64>::zeros(4, 4);
    for (r, s) in [(0, -1.0), (1, 1.0), (2, 1.0), (3, -1.0)] {
        yy[(r, 3 - r)] = C64::new(s, 0.0);
    }
    let flipped = &yy * rho.conjugate() * &yy;
    let s = hermitian_sqrt(rho);
    let m = &s * flipped * &s;
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut l: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().map(|x| x.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rd(p: [f64; 4], d: f64) -> RestrictedDensity {
        RestrictedDensity::new(p[0], p[1], p[2], p[3], C64::new(d, 0.0)).unwrap()
    }

    #[test]
    fn single_excitation_bell_state() {
        let r = concurrence_restricted(&rd([0.0, 0.5, 0.5, 0.0], 0.5));
        assert!((r.concurrence - 1.0).abs() < 1e-14);
        assert!((r.eof - 1.0).abs() < 1e-12);
        assert!((wootters_concurrence(&rd([0.0, 0.5, 0.5, 0.0], 0.5).rho_tilde()).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn no_coherence_no_entanglement() {
        let r = concurrence_restricted(&rd([0.9, 0.04, 0.05, 0.01], 0.0));
        assert_eq!(r.concurrence, 0.0);
        assert_eq!(r.eof, 0.0);
    }

    #[test]
    fn maximally_mixed_is_separable() {
        let m = DMatrix::<C64>::identity(4, 4) * C64::new(0.25, 0.0);
        assert!(wootters_concurrence(&m).unwrap() < 1e-12);
    }

    #[test]
    fn non_positive_input_is_rejected() {
        let bad = rd([0.5, 0.25, 0.25, 0.0], 0.4).rho_tilde();
        assert!(matches!(wootters_concurrence(&bad), Err(EntanglementError::InvalidState(_))));
    }

    #[test]
    fn eof_is_monotone() {
        let mut last = -1.0;
        for k in 0..=1000 {
            let e = entanglement_of_formation(k as f64 / 1000.0);
            assert!(e > last || k == 0);
            last = e;
        }
        assert_eq!(entanglement_of_formation(0.0), 0.0);
        assert!((entanglement_of_formation(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn separability_boundary_on_a_grid() {
        for i in 1..20 {
            for j in 0..20 {
                let p11 = 0.001 * i as f64;
                let d = 0.002 * j as f64;
                let p00 = 0.9 - p11;
                let r = concurrence_restricted(&rd([p00, 0.05, 0.05, p11], d));
                assert_eq!(r.concurrence > 0.0, d > (p00 * p11).sqrt());
            }
        }
    }

    #[test]
    fn monte_carlo_matches_linear_errors_away_from_the_kink() {
        let r = rd([0.9, 0.05, 0.045, 0.0005], 0.04);
        let s = RestrictedSigma { p00: 1e-3, p11: 2e-5, d_abs: 1e-3 };
        let c = concurrence_with_uncertainty(&r, &s, 20_000, 3);
        assert!((c.sigma_mc.unwrap() / c.sigma - 1.0).abs() < 0.05, "{c:?}");
    }
}
