use nalgebra::DVector;

use super::local::{apply_local_vec, embed_vacuum_vec};
use super::optics::{beamsplitter_unitary, phase_operator};
use super::{tol, DensityOperator, FockError, ModeRegister, C64};

/// Truncation discarding more norm than this is flagged on the returned state.
pub const TRUNCATION_WARNING_THRESHOLD: f64 = 1e-6;

/// Anything with Fock-basis populations over a register.
pub trait FockState {
    fn register(&self) -> &ModeRegister;
    /// Diagonal of the state in the Fock basis.
    fn populations(&self) -> Vec<f64>;
}

/// Normalised state vector over a [`ModeRegister`].
#[derive(Clone, Debug)]
pub struct PureState {
    register: ModeRegister,
    amplitudes: DVector<C64>,
    truncation_deficit: f64,
}

impl PureState {
    pub fn new(register: ModeRegister, amplitudes: DVector<C64>) -> Result<Self, FockError> {
        if amplitudes.len() != register.dim() {
            return Err(FockError::ShapeMismatch {
                rows: amplitudes.len(),
                cols: 1,
                dimension: register.dim(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > tol::NORM {
            return Err(FockError::BadNorm(norm));
        }
        Ok(Self { register, amplitudes, truncation_deficit: 0.0 })
    }

    /// Normalises `amplitudes`, recording the squared-norm deficit `1 - |v|²`
    /// as the truncation loss.
    pub fn from_truncated(
        register: ModeRegister,
        amplitudes: DVector<C64>,
    ) -> Result<Self, FockError> {
        let norm_sq = amplitudes.norm_squared();
        if norm_sq <= 0.0 {
            return Err(FockError::ZeroWeight(norm_sq));
        }
        let mut state = Self::new(register, amplitudes.unscale(norm_sq.sqrt()))?;
        state.truncation_deficit = (1.0 - norm_sq).max(0.0);
        Ok(state)
    }

    pub fn vacuum(register: ModeRegister) -> Self {
        Self::fock(register, &vec![0; register.n_modes()]).expect("vacuum is representable")
    }

    pub fn fock(register: ModeRegister, occupations: &[usize]) -> Result<Self, FockError> {
        let idx = register.index_of(occupations).ok_or(FockError::Truncation {
            reach: occupations.iter().copied().max().unwrap_or(0),
            cutoff: register.cutoff(),
        })?;
        let mut amps = DVector::zeros(register.dim());
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self { register, amplitudes: amps, truncation_deficit: 0.0 })
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, occupations: &[usize]) -> C64 {
        self.register
            .index_of(occupations)
            .map(|i| self.amplitudes[i])
            .unwrap_or_default()
    }

    /// Squared norm discarded by truncation before normalisation.
    pub fn truncation_deficit(&self) -> f64 {
        self.truncation_deficit
    }

    pub fn truncation_warning(&self) -> bool {
        self.truncation_deficit > TRUNCATION_WARNING_THRESHOLD
    }

    /// `self ⊗ other`; both registers must share a cutoff.
    pub fn tensor(&self, other: &PureState) -> Result<PureState, FockError> {
        if self.register.cutoff() != other.register.cutoff() {
            return Err(FockError::RegisterMismatch(format!(
                "cutoffs {} and {}",
                self.register.cutoff(),
                other.register.cutoff()
            )));
        }
        let register = self
            .register
            .extended(other.register.n_modes())?;
        let amplitudes = self.amplitudes.kronecker(&other.amplitudes);
        // deficits combine as 1 - (1-a)(1-b)
        let deficit = 1.0 - (1.0 - self.truncation_deficit) * (1.0 - other.truncation_deficit);
        Ok(Self { register, amplitudes, truncation_deficit: deficit })
    }

    /// Appends `extra` vacuum modes.
    pub fn with_vacuum_modes(&self, extra: usize) -> Result<PureState, FockError> {
        let (register, amplitudes) = embed_vacuum_vec(&self.register, &self.amplitudes, extra)?;
        Ok(Self { register, amplitudes, truncation_deficit: self.truncation_deficit })
    }

    pub fn apply_beamsplitter(&self, t: f64, i: usize, j: usize) -> Result<PureState, FockError> {
        let u = beamsplitter_unitary(&self.register, t, i, j)?;
        let mut amps = self.amplitudes.clone();
        apply_local_vec(&self.register, &mut amps, &u, &[i, j])?;
        Ok(Self { amplitudes: amps, ..self.clone() })
    }

    pub fn apply_phase(&self, phi: f64, mode: usize) -> Result<PureState, FockError> {
        self.register.check_mode(mode)?;
        let p = phase_operator(&self.register, phi);
        let mut amps = self.amplitudes.clone();
        apply_local_vec(&self.register, &mut amps, &p, &[mode])?;
        Ok(Self { amplitudes: amps, ..self.clone() })
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator::from_pure(self)
    }
}

impl FockState for PureState {
    fn register(&self) -> &ModeRegister {
        &self.register
    }

    fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Pair-correlated state `∝ Σ_n chi^(n/2) |n⟩|n⟩` on a two-mode register,
/// truncated at `cutoff` and renormalised.
///
/// The discarded tail `chi^(cutoff+1)` is kept as the state's truncation
/// deficit; [`PureState::truncation_warning`] flags it above 1e-6.
pub fn two_mode_squeezed(chi: f64, cutoff: usize) -> Result<PureState, FockError> {
    if !(0.0..1.0).contains(&chi) {
        return Err(FockError::InvalidChi(chi));
    }
    let register = ModeRegister::new(2, cutoff)?;
    let mut amps = DVector::zeros(register.dim());
    let base = (1.0 - chi).sqrt();
    for n in 0..=cutoff {
        let idx = register.index_of(&[n, n]).expect("within cutoff");
        amps[idx] = C64::new(base * chi.powf(n as f64 / 2.0), 0.0);
    }
    PureState::from_truncated(register, amps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_chi_is_vacuum() {
        let s = two_mode_squeezed(0.0, 3).unwrap();
        assert_eq!(s.amplitude(&[0, 0]), C64::new(1.0, 0.0));
        assert_eq!(s.truncation_deficit(), 0.0);
    }

    #[test]
    fn amplitude_ratio_is_chi() {
        let s = two_mode_squeezed(0.01, 2).unwrap();
        let r = s.amplitude(&[1, 1]).norm_sqr() / s.amplitude(&[0, 0]).norm_sqr();
        assert!((r - 0.01).abs() < 1e-12);
    }

    #[test]
    fn truncation_deficit_matches_tail_sum() {
        let chi: f64 = 0.2;
        let s = two_mode_squeezed(chi, 4).unwrap();
        // explicit series of the discarded tail, summed until negligible
        let tail: f64 = (5..400).map(|n| (1.0 - chi) * chi.powi(n)).sum();
        assert!((s.truncation_deficit() - chi.powi(5)).abs() < 1e-12);
        assert!((s.truncation_deficit() - tail).abs() < 1e-12);
        assert!(s.truncation_warning());
        assert!(!two_mode_squeezed(0.01, 3).unwrap().truncation_warning());
    }

    #[test]
    fn chi_out_of_range() {
        assert_eq!(two_mode_squeezed(1.0, 3).unwrap_err(), FockError::InvalidChi(1.0));
        assert!(two_mode_squeezed(-0.1, 3).is_err());
    }

    #[test]
    fn tensor_orders_modes() {
        let reg = ModeRegister::new(1, 2).unwrap();
        let a = PureState::fock(reg, &[1]).unwrap();
        let b = PureState::fock(reg, &[2]).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.amplitude(&[1, 2]), C64::new(1.0, 0.0));
    }
}
