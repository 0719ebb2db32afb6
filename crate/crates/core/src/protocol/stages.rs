use serde::{Deserialize, Serialize};

use super::{
    EnsembleParams, Herald, HeraldChoice, HeraldDetectors, InterferometerParams, ProtocolError,
};
use crate::detection::{
    click_probabilities, condition_pure_on_pattern, ClickPattern, DetectorSpec, JointProbabilities,
};
use crate::fock::{two_mode_squeezed, DensityOperator, FockState, LinearOpticsElement, PureState};

/// Mode indices of the write/herald register.
pub mod modes {
    pub const FIELD1_L: usize = 0;
    pub const ATOM_L: usize = 1;
    pub const FIELD1_R: usize = 2;
    pub const ATOM_R: usize = 3;
    /// Component of 1_R orthogonal to 1_L's mode (present when overlap < 1).
    pub const FIELD1_R_ORTH: usize = 4;
    /// Its partner at BS1, added at the herald stage.
    pub const FIELD1_L_ORTH: usize = 5;
}

/// Herald probabilities below this are refused.
pub const MIN_HERALD_PROBABILITY: f64 = 1e-15;

/// Two pair sources, `(1_L, a_L) ⊗ (1_R, a_R)`, each `∝ Σ chi^(n/2)|n,n⟩`.
///
/// For `overlap < 1` a fifth mode holds the part of 1_R orthogonal to the
/// mode of 1_L: 1_R is split into amplitudes `λ` and `√(1−λ²)`.
pub fn write_stage(
    left: &EnsembleParams,
    right: &EnsembleParams,
    overlap: f64,
    cutoff: usize,
) -> Result<PureState, ProtocolError> {
    if cutoff < 2 {
        return Err(ProtocolError::param("cutoff", "must be at least 2"));
    }
    left.validate("L")?;
    right.validate("R")?;
    if !(0.0..=1.0).contains(&overlap) {
        return Err(ProtocolError::param("overlap", format!("{overlap} not in [0, 1]")));
    }
    let psi = two_mode_squeezed(left.chi, cutoff)?.tensor(&two_mode_squeezed(right.chi, cutoff)?)?;
    if overlap == 1.0 {
        return Ok(psi);
    }
    Ok(psi
        .with_vacuum_modes(1)?
        .apply_beamsplitter(overlap * overlap, modes::FIELD1_R, modes::FIELD1_R_ORTH)?)
}

fn herald_detectors(n_modes: usize, d1: &HeraldDetectors) -> [DetectorSpec; 2] {
    // D1a sits on the output slot of 1_R, D1b on that of 1_L
    let (a, b): (Vec<usize>, Vec<usize>) = if n_modes > modes::FIELD1_R_ORTH {
        (
            vec![modes::FIELD1_R, modes::FIELD1_R_ORTH],
            vec![modes::FIELD1_L, modes::FIELD1_L_ORTH],
        )
    } else {
        (vec![modes::FIELD1_R], vec![modes::FIELD1_L])
    };
    [
        DetectorSpec::watching("D1a", d1.d1a, &a).with_dark_count(d1.dark_count),
        DetectorSpec::watching("D1b", d1.d1b, &b).with_dark_count(d1.dark_count),
    ]
}

/// Phase η1 on 1_L, then BS1 on both polarisation pairs.
fn combine_field1(state: &PureState, interf: &InterferometerParams) -> Result<PureState, ProtocolError> {
    interf.validate()?;
    let mut psi = state.apply_phase(interf.eta1, modes::FIELD1_L)?;
    psi = psi.apply_beamsplitter(interf.bs1_t, modes::FIELD1_L, modes::FIELD1_R)?;
    if state.register().n_modes() > modes::FIELD1_R_ORTH {
        if state.register().n_modes() == modes::FIELD1_R_ORTH + 1 {
            psi = psi.with_vacuum_modes(1)?;
        }
        psi = psi.apply_beamsplitter(interf.bs1_t, modes::FIELD1_L_ORTH, modes::FIELD1_R_ORTH)?;
    }
    Ok(psi)
}

/// Probabilities of the four D1a/D1b patterns (bit order D1a, D1b).
pub fn herald_probabilities(
    state: &PureState,
    interf: &InterferometerParams,
    d1: &HeraldDetectors,
) -> Result<JointProbabilities, ProtocolError> {
    let psi = combine_field1(state, interf)?;
    let dets = herald_detectors(psi.register().n_modes(), d1);
    Ok(click_probabilities(&psi, &dets)?)
}

/// Conditional atomic state on `(a_L, a_R)` after the herald, and the
/// herald probability. An inclusive herald mixes both outcomes of the other
/// detector.
pub fn herald(
    state: &PureState,
    interf: &InterferometerParams,
    choice: &HeraldChoice,
    d1: &HeraldDetectors,
) -> Result<(DensityOperator, f64), ProtocolError> {
    let n = state.register().n_modes();
    if n < 4 {
        return Err(ProtocolError::param("state", "write-stage register expected"));
    }
    let psi = combine_field1(state, interf)?;
    let dets = herald_detectors(psi.register().n_modes(), d1);
    let (fire, other) = match choice.which {
        Herald::D1a => (0, 1),
        Herald::D1b => (1, 0),
    };
    let mut patterns = Vec::new();
    let mut bits = [false; 2];
    bits[fire] = true;
    patterns.push(ClickPattern::new(bits.to_vec()));
    if !choice.exclusive {
        bits[other] = true;
        patterns.push(ClickPattern::new(bits.to_vec()));
    }
    let mut parts = Vec::new();
    let mut total = 0.0;
    for p in &patterns {
        match condition_pure_on_pattern(&psi, &dets, p) {
            Ok((rho, prob)) => {
                total += prob;
                parts.push((prob, rho));
            }
            Err(crate::detection::DetectionError::ZeroProbability { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    if !(total >= MIN_HERALD_PROBABILITY) || parts.is_empty() {
        return Err(ProtocolError::HeraldTooRare(total));
    }
    let rho = if parts.len() == 1 { parts.pop().expect("one part").1 } else { DensityOperator::mixture(&parts)? };
    Ok((rho, total))
}

/// Field state of `(2_L, 2_R)` at the ensemble output, conditioned on a herald.
#[derive(Clone, Debug)]
pub struct ConditionalFieldState {
    pub rho: DensityOperator,
    pub herald_probability: f64,
    pub herald: HeraldChoice,
    pub left: EnsembleParams,
    pub right: EnsembleParams,
    pub interferometer: InterferometerParams,
    /// Norm discarded by the Fock cutoff at the write stage.
    pub truncation_deficit: f64,
}

/// Maps `(a_L, a_R)` to `(2_L, 2_R)`: retrieval as attenuation `ξ`, then the
/// read-path phase η2 and optional Gaussian phase noise on 2_L.
pub fn read_stage(
    atomic: &DensityOperator,
    xi_l: f64,
    xi_r: f64,
    interf: &InterferometerParams,
) -> Result<DensityOperator, ProtocolError> {
    if atomic.register().n_modes() != 2 {
        return Err(ProtocolError::param("atomic", "two atomic modes expected"));
    }
    interf.validate()?;
    use LinearOpticsElement::*;
    Ok(atomic.apply_all(&[
        Loss { eta: xi_l, mode: 0 },
        Loss { eta: xi_r, mode: 1 },
        Phase { phi: interf.eta2, mode: 0 },
        Dephasing { sigma: interf.phase_jitter_sigma, mode: 0 },
    ])?)
}

/// Write, herald and read in sequence.
pub fn heralded_field_state(
    left: &EnsembleParams,
    right: &EnsembleParams,
    interf: &InterferometerParams,
    choice: &HeraldChoice,
    d1: &HeraldDetectors,
    cutoff: usize,
) -> Result<ConditionalFieldState, ProtocolError> {
    let psi = write_stage(left, right, interf.overlap, cutoff)?;
    let deficit = psi.truncation_deficit();
    let (atomic, p) = herald(&psi, interf, choice, d1)?;
    let rho = read_stage(&atomic, left.xi, right.xi, interf)?;
    Ok(ConditionalFieldState {
        rho,
        herald_probability: p,
        herald: *choice,
        left: *left,
        right: *right,
        interferometer: *interf,
        truncation_deficit: deficit,
    })
}

/// Mode-overlap amplitude of two fields launched in orthogonal polarisations
/// through fibres of the given polarisation extinction ratio (dB): each leaks
/// a fraction `x = 10^(−dB/10)` into the other axis, so the overlap is
/// `2√(x(1−x))`.
pub fn overlap_from_extinction_db(db: f64) -> f64 {
    let x = 10f64.powf(-db / 10.0);
    2.0 * (x * (1.0 - x)).sqrt()
}

/// Atomic populations inferred from field populations at the ensemble
/// output by dividing out the retrieval efficiencies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicInference {
    pub p00: f64,
    pub p10: f64,
    pub p01: f64,
    /// `p00` came out negative and was set to zero.
    pub p00_clamped: bool,
    /// Coherence under constant visibility, `V (p10 + p01) / 2`.
    pub d_abs: f64,
    /// Concurrence of the renormalised one-excitation block.
    pub concurrence: f64,
}

pub fn infer_atomic(p10: f64, p01: f64, visibility: f64, xi_l: f64, xi_r: f64) -> Result<AtomicInference, ProtocolError> {
    if !(xi_l > 0.0 && xi_r > 0.0) {
        return Err(ProtocolError::param("xi", "retrieval efficiencies must be positive"));
    }
    let a10 = p10 / xi_l;
    let a01 = p01 / xi_r;
    let raw00 = 1.0 - a10 - a01;
    let p00 = raw00.max(0.0);
    let total = p00 + a10 + a01;
    let d_abs = visibility * (a10 + a01) / 2.0;
    Ok(AtomicInference {
        p00: p00 / total,
        p10: a10 / total,
        p01: a01 / total,
        p00_clamped: raw00 < 0.0,
        d_abs: d_abs / total,
        concurrence: (2.0 * d_abs / total).max(0.0),
    })
}

/// Click statistics of one ensemble's fields 1 and 2 with no interference:
/// `(p1, p2, p12)`.
///
/// Field 2 is the atomic mode read out with efficiency `xi`; the two
/// detectors have efficiencies `eta1`, `eta2`.
pub fn single_ensemble_stats(
    ens: &EnsembleParams,
    eta1: f64,
    eta2: f64,
    cutoff: usize,
) -> Result<(f64, f64, f64), ProtocolError> {
    ens.validate("ensemble")?;
    let rho = two_mode_squeezed(ens.chi, cutoff)?
        .to_density()
        .apply(&LinearOpticsElement::Loss { eta: ens.xi, mode: 1 })?;
    let jp = click_probabilities(
        &rho,
        &[DetectorSpec::new("1", eta1, 0), DetectorSpec::new("2", eta2, 1)],
    )?;
    let p12 = jp.get(&ClickPattern::new(vec![true, true]));
    Ok((jp.click_probability(0), jp.click_probability(1), p12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{ModeRegister, C64};

    fn ens(chi: f64) -> EnsembleParams {
        EnsembleParams { chi, xi: 1.0 }
    }

    #[test]
    fn zero_chi_is_global_vacuum() {
        let psi = write_stage(&ens(0.0), &ens(0.0), 1.0, 2).unwrap();
        assert!((psi.amplitude(&[0, 0, 0, 0]).norm() - 1.0).abs() < 1e-15);
        let psi = write_stage(&ens(0.0), &ens(0.0), 0.3, 2).unwrap();
        assert!((psi.amplitude(&[0, 0, 0, 0, 0]).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_excitation_probability() {
        let psi = write_stage(&ens(1e-3), &ens(1e-3), 1.0, 3).unwrap();
        let p = psi.amplitude(&[1, 1, 0, 0]).norm_sqr() + psi.amplitude(&[0, 0, 1, 1]).norm_sqr();
        // series oracle: 2 chi (1 - chi)^2 / normalisation
        let oracle = 2.0 * 1e-3 * (1.0 - 1e-3f64).powi(2);
        assert!((p / oracle - 1.0).abs() < 1e-6);
        assert!((p / 2e-3 - 1.0).abs() < 0.02);
    }

    #[test]
    fn full_overlap_has_no_ancilla() {
        let psi = write_stage(&ens(0.1), &ens(0.1), 1.0, 2).unwrap();
        assert_eq!(psi.register().n_modes(), 4);
    }

    fn target(eps_l: f64, eps_r: f64, sign: f64) -> PureState {
        let reg = ModeRegister::new(2, 3).unwrap();
        let n = (eps_l * eps_l + eps_r * eps_r).sqrt();
        let mut v = nalgebra::DVector::zeros(reg.dim());
        v[reg.index_of(&[1, 0]).unwrap()] = C64::new(eps_l / n, 0.0);
        v[reg.index_of(&[0, 1]).unwrap()] = C64::new(sign * eps_r / n, 0.0);
        PureState::new(reg, v).unwrap()
    }

    #[test]
    fn balanced_herald_is_near_bell_state() {
        let chi = 1e-4;
        let psi = write_stage(&ens(chi), &ens(chi), 1.0, 3).unwrap();
        let interf = InterferometerParams::default();
        let d1 = HeraldDetectors::default();
        let (a, _) = herald(&psi, &interf, &HeraldChoice::exclusive(Herald::D1a), &d1).unwrap();
        assert!(a.fidelity_pure(&target(1.0, 1.0, -1.0)).unwrap() >= 0.999);
        let (b, _) = herald(&psi, &interf, &HeraldChoice::exclusive(Herald::D1b), &d1).unwrap();
        assert!(b.fidelity_pure(&target(1.0, 1.0, 1.0)).unwrap() >= 0.999);
    }

    #[test]
    fn asymmetric_herald_matches_first_order_amplitudes() {
        // D1a: eps_L ∝ √(R chi_L), eps_R ∝ √(T chi_R)
        let (cl, cr, t) = (1e-3, 1.4e-3, 0.3);
        let psi = write_stage(&ens(cl), &ens(cr), 1.0, 3).unwrap();
        let interf = InterferometerParams { bs1_t: t, ..Default::default() };
        let d1 = HeraldDetectors::default();
        let (a, _) = herald(&psi, &interf, &HeraldChoice::exclusive(Herald::D1a), &d1).unwrap();
        let f = a.fidelity_pure(&target(((1.0 - t) * cl).sqrt(), (t * cr).sqrt(), -1.0)).unwrap();
        assert!(f >= 0.99, "{f}");
        let (b, _) = herald(&psi, &interf, &HeraldChoice::exclusive(Herald::D1b), &d1).unwrap();
        let f = b.fidelity_pure(&target((t * cl).sqrt(), ((1.0 - t) * cr).sqrt(), 1.0)).unwrap();
        assert!(f >= 0.99, "{f}");
    }

    #[test]
    fn herald_patterns_sum_to_one() {
        let psi = write_stage(&ens(0.02), &ens(0.03), 0.6, 3).unwrap();
        let interf = InterferometerParams { bs1_t: 0.4, eta1: 0.3, ..Default::default() };
        let jp = herald_probabilities(&psi, &interf, &HeraldDetectors { d1a: 0.5, d1b: 0.7, dark_count: 0.0 }).unwrap();
        assert!((jp.total() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn orthogonal_heralding_erases_coherence() {
        let psi = write_stage(&ens(1e-2), &ens(1e-2), 0.0, 3).unwrap();
        let interf = InterferometerParams::default();
        let (a, _) =
            herald(&psi, &interf, &HeraldChoice::exclusive(Herald::D1a), &HeraldDetectors::default())
                .unwrap();
        assert!(a.element(&[1, 0], &[0, 1]).norm() < 1e-12);
    }

    #[test]
    fn retrieval_loss_arithmetic() {
        let reg = ModeRegister::new(2, 3).unwrap();
        let atomic = target(1.0, 1.0, 1.0).to_density();
        let f = read_stage(&atomic, 1.0, 1.0, &InterferometerParams::default()).unwrap();
        assert!((f.matrix() - atomic.matrix()).norm() < 1e-15);
        let f = read_stage(&atomic, 0.1, 0.1, &InterferometerParams::default()).unwrap();
        assert_eq!(f.register(), &reg);
        assert!((f.population(&[0, 0]) - 0.9).abs() < 1e-12);
        assert!((f.population(&[1, 0]) + f.population(&[0, 1]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn extinction_overlap() {
        let l = overlap_from_extinction_db(28.0);
        assert!((l - 0.0796).abs() < 5e-4, "{l}");
        assert!(overlap_from_extinction_db(300.0) < 1e-12);
    }

    #[test]
    fn atomic_inference_saturates() {
        let a = infer_atomic(0.055, 0.055, 0.7, 0.1, 0.1).unwrap();
        assert!(a.p00_clamped);
        assert_eq!(a.p00, 0.0);
        assert!((a.concurrence - 0.7).abs() < 1e-12);
    }

    #[test]
    fn cross_correlation_of_weak_pairs() {
        let (p1, p2, p12) =
            single_ensemble_stats(&EnsembleParams { chi: 1e-2, xi: 1.0 }, 1.0, 1.0, 3).unwrap();
        let g = p12 / (p1 * p2);
        assert!((g - 100.0).abs() < 5.0, "{g}");
    }
}
