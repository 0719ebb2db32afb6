use nalgebra::DMatrix;

use super::pattern::validate_detectors;
use super::{ClickPattern, DetectionError, DetectorSpec};
use crate::fock::{DensityOperator, FockState, ModeRegister, PureState, C64};

/// Patterns rarer than this are refused as conditioning events.
pub const MIN_PATTERN_PROBABILITY: f64 = 1e-15;

/// Basis indices grouped by the digits on the detected modes:
/// `groups[g][k]` is the register index with detected configuration `g`
/// and kept-mode index `k`.
struct Slices {
    detected: Vec<Vec<usize>>,
    groups: Vec<Vec<usize>>,
    kept: Vec<usize>,
}

impl Slices {
    fn new(reg: &ModeRegister, detected_modes: &[usize]) -> Self {
        let kept: Vec<usize> = (0..reg.n_modes()).filter(|m| !detected_modes.contains(m)).collect();
        let levels = reg.levels();
        let n_groups = levels.pow(detected_modes.len() as u32);
        let n_kept = levels.pow(kept.len() as u32);
        let mut groups = vec![vec![0usize; n_kept]; n_groups];
        let mut detected = vec![Vec::new(); n_groups];
        for i in 0..reg.dim() {
            let g = detected_modes.iter().fold(0, |a, &m| a * levels + reg.occupation(i, m));
            let k = kept.iter().fold(0, |a, &m| a * levels + reg.occupation(i, m));
            groups[g][k] = i;
            if k == 0 {
                detected[g] = reg.occupations(i);
            }
        }
        Self { detected, groups, kept }
    }
}

fn check_pattern(detectors: &[DetectorSpec], pattern: &ClickPattern) -> Result<(), DetectionError> {
    if pattern.len() != detectors.len() {
        return Err(DetectionError::PatternLength { expected: detectors.len(), got: pattern.len() });
    }
    Ok(())
}

fn pattern_weight(detectors: &[DetectorSpec], pattern: &ClickPattern, occ: &[usize]) -> f64 {
    detectors
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let q = d.no_click_weight(occ);
            if pattern.clicked(k) { 1.0 - q } else { q }
        })
        .product()
}

fn finish(
    pattern: &ClickPattern,
    kept: usize,
    cutoff: usize,
    mut m: DMatrix<C64>,
) -> Result<(DensityOperator, f64), DetectionError> {
    let p = m.trace().re;
    if !(p >= MIN_PATTERN_PROBABILITY) {
        return Err(DetectionError::ZeroProbability { pattern: pattern.to_string(), probability: p });
    }
    m.unscale_mut(p);
    let reg = ModeRegister::new(kept, cutoff)?;
    Ok((DensityOperator::new(reg, m)?, p))
}

fn detected_modes(detectors: &[DetectorSpec]) -> Vec<usize> {
    let mut modes: Vec<usize> = detectors.iter().flat_map(|d| d.modes.iter().copied()).collect();
    modes.sort_unstable();
    modes
}

/// State of the undetected modes after `detectors` report `pattern`, and the
/// probability of that pattern.
///
/// Inefficiency is realised as an attenuation channel in front of an ideal
/// detector: losses are applied to the detected modes, then the ideal
/// no-click projector `|0⟩⟨0|` (or its complement) acts and the detected
/// modes are traced out. The remaining modes keep their register order.
pub fn condition_on_pattern(
    rho: &DensityOperator,
    detectors: &[DetectorSpec],
    pattern: &ClickPattern,
) -> Result<(DensityOperator, f64), DetectionError> {
    let reg = *rho.register();
    validate_detectors(&reg, detectors)?;
    check_pattern(detectors, pattern)?;
    let mut lossy = rho.clone();
    for d in detectors {
        for &m in &d.modes {
            lossy = crate::fock::apply_loss(&lossy, d.efficiency, m)?;
        }
    }
    let ideal: Vec<DetectorSpec> =
        detectors.iter().map(|d| DetectorSpec { efficiency: 1.0, ..d.clone() }).collect();
    let slices = Slices::new(&reg, &detected_modes(detectors));
    let n_kept = slices.groups[0].len();
    let mut out = DMatrix::<C64>::zeros(n_kept, n_kept);
    let m = lossy.matrix();
    for (g, idx) in slices.groups.iter().enumerate() {
        let w = pattern_weight(&ideal, pattern, &slices.detected[g]);
        if w == 0.0 {
            continue;
        }
        for (c, &ic) in idx.iter().enumerate() {
            for (r, &ir) in idx.iter().enumerate() {
                out[(r, c)] += m[(ir, ic)] * w;
            }
        }
    }
    finish(pattern, slices.kept.len(), reg.cutoff(), out)
}

/// [`condition_on_pattern`] for a pure input, without forming the full
/// density matrix: each detected configuration contributes its weighted
/// rank-one slice.
pub fn condition_pure_on_pattern(
    psi: &PureState,
    detectors: &[DetectorSpec],
    pattern: &ClickPattern,
) -> Result<(DensityOperator, f64), DetectionError> {
    let reg = *psi.register();
    validate_detectors(&reg, detectors)?;
    check_pattern(detectors, pattern)?;
    let slices = Slices::new(&reg, &detected_modes(detectors));
    let n_kept = slices.groups[0].len();
    let amps = psi.amplitudes();
    let mut out = DMatrix::<C64>::zeros(n_kept, n_kept);
    let mut v = nalgebra::DVector::<C64>::zeros(n_kept);
    for (g, idx) in slices.groups.iter().enumerate() {
        let w = pattern_weight(detectors, pattern, &slices.detected[g]);
        if w == 0.0 {
            continue;
        }
        for (k, &i) in idx.iter().enumerate() {
            v[k] = amps[i];
        }
        if v.iter().all(|a| *a == C64::new(0.0, 0.0)) {
            continue;
        }
        out.ger(C64::new(w, 0.0), &v, &v.conjugate(), C64::new(1.0, 0.0));
    }
    finish(pattern, slices.kept.len(), reg.cutoff(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::click_probabilities;
    use crate::fock::{apply_beamsplitter, two_mode_squeezed};

    #[test]
    fn vacuum_herald_on_product_state() {
        let reg = ModeRegister::new(1, 2).unwrap();
        let a = PureState::fock(reg, &[1]).unwrap();
        let b = PureState::fock(reg, &[2]).unwrap();
        let psi = a.tensor(&b).unwrap();
        let dets = [DetectorSpec::new("a", 0.25, 0)];
        let (rho, p) = condition_pure_on_pattern(&psi, &dets, &"0".parse().unwrap()).unwrap();
        assert!((p - 0.75).abs() < 1e-14);
        assert!((rho.population(&[2]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn delocalised_photon_split_on_balanced_splitter() {
        // photon in mode 0 or 2 equally; mode 1 is a vacuum port
        let reg = ModeRegister::new(3, 2).unwrap();
        let mut v = nalgebra::DVector::zeros(reg.dim());
        v[reg.index_of(&[1, 0, 0]).unwrap()] = C64::new(0.5f64.sqrt(), 0.0);
        v[reg.index_of(&[0, 0, 1]).unwrap()] = C64::new(0.5f64.sqrt(), 0.0);
        let rho = PureState::new(reg, v).unwrap().to_density();
        let rho = apply_beamsplitter(&rho, 0.5, 0, 1).unwrap();
        let dets = [DetectorSpec::new("x", 1.0, 0), DetectorSpec::new("y", 1.0, 1)];
        let (post, p) = condition_on_pattern(&rho, &dets, &"10".parse().unwrap()).unwrap();
        assert!((p - 0.25).abs() < 1e-12);
        assert!(post.population(&[0]) > 0.999_999);
        let (post, p) = condition_on_pattern(&rho, &dets, &"00".parse().unwrap()).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!((post.population(&[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_pattern_is_an_error() {
        let rho = DensityOperator::vacuum(ModeRegister::new(2, 2).unwrap());
        let dets = [DetectorSpec::new("a", 1.0, 0)];
        assert!(matches!(
            condition_on_pattern(&rho, &dets, &"1".parse().unwrap()),
            Err(DetectionError::ZeroProbability { .. })
        ));
    }

    #[test]
    fn routes_agree_with_each_other_and_with_click_probabilities() {
        let s = two_mode_squeezed(0.2, 3).unwrap();
        let psi = s.tensor(&two_mode_squeezed(0.1, 3).unwrap()).unwrap();
        let psi = psi.apply_beamsplitter(0.4, 0, 2).unwrap();
        let dets = [
            DetectorSpec::new("a", 0.6, 0).with_dark_count(1e-3),
            DetectorSpec::new("b", 0.9, 2),
        ];
        let rho = psi.to_density();
        let jp = click_probabilities(&psi, &dets).unwrap();
        for pattern in ClickPattern::all(2) {
            let (r1, p1) = condition_on_pattern(&rho, &dets, &pattern).unwrap();
            let (r2, p2) = condition_pure_on_pattern(&psi, &dets, &pattern).unwrap();
            assert!((p1 - p2).abs() < 1e-12);
            assert!((p1 - jp.get(&pattern)).abs() < 1e-12);
            assert!((r1.matrix() - r2.matrix()).norm() < 1e-10);
        }
    }
}
