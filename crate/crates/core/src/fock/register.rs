use serde::{Deserialize, Serialize};

use super::FockError;

/// Default bound on the Hilbert-space dimension of a register.
pub const MAX_DIMENSION: usize = 4096;

/// A set of bosonic modes sharing one photon-number cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeRegister {
    n_modes: usize,
    cutoff: usize,
}

impl ModeRegister {
    pub fn new(n_modes: usize, cutoff: usize) -> Result<Self, FockError> {
        Self::with_limit(n_modes, cutoff, MAX_DIMENSION)
    }

    /// Like [`ModeRegister::new`] with an explicit dimension bound.
    pub fn with_limit(n_modes: usize, cutoff: usize, limit: usize) -> Result<Self, FockError> {
        if n_modes == 0 || cutoff == 0 {
            return Err(FockError::InvalidRegister { n_modes, cutoff });
        }
        let mut dimension: usize = 1;
        for _ in 0..n_modes {
            dimension = dimension
                .checked_mul(cutoff + 1)
                .filter(|d| *d <= limit)
                .ok_or(FockError::DimensionTooLarge {
                    dimension: (cutoff + 1).saturating_pow(n_modes as u32),
                    limit,
                })?;
        }
        Ok(Self { n_modes, cutoff })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Levels per mode, `cutoff + 1`.
    pub fn levels(&self) -> usize {
        self.cutoff + 1
    }

    pub fn dim(&self) -> usize {
        self.levels().pow(self.n_modes as u32)
    }

    /// Index step of one photon in `mode`.
    pub fn stride(&self, mode: usize) -> usize {
        self.levels().pow((self.n_modes - 1 - mode) as u32)
    }

    pub fn check_mode(&self, mode: usize) -> Result<(), FockError> {
        if mode < self.n_modes {
            Ok(())
        } else {
            Err(FockError::ModeOutOfRange { mode, n_modes: self.n_modes })
        }
    }

    /// Photon number of `mode` in basis state `index`.
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.stride(mode)) % self.levels()
    }

    pub fn occupations(&self, index: usize) -> Vec<usize> {
        (0..self.n_modes).map(|m| self.occupation(index, m)).collect()
    }

    /// Basis index of an occupation tuple, `None` if any entry exceeds the cutoff.
    pub fn index_of(&self, occupations: &[usize]) -> Option<usize> {
        if occupations.len() != self.n_modes || occupations.iter().any(|&n| n > self.cutoff) {
            return None;
        }
        Some(occupations.iter().fold(0, |acc, &n| acc * self.levels() + n))
    }

    pub fn total_photons(&self, index: usize) -> usize {
        (0..self.n_modes).map(|m| self.occupation(index, m)).sum()
    }

    /// Register with `extra` vacuum modes appended at the end.
    pub fn extended(&self, extra: usize) -> Result<Self, FockError> {
        Self::new(self.n_modes + extra, self.cutoff)
    }

    /// Register over a subset of modes (same cutoff).
    pub fn sub(&self, n_modes: usize) -> Result<Self, FockError> {
        Self::new(n_modes, self.cutoff)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_and_oversized_registers() {
        assert!(ModeRegister::new(0, 3).is_err());
        assert!(ModeRegister::new(2, 0).is_err());
        assert!(matches!(
            ModeRegister::new(7, 3),
            Err(FockError::DimensionTooLarge { .. })
        ));
        assert_eq!(ModeRegister::new(6, 3).unwrap().dim(), 4096);
    }

    #[test]
    fn index_round_trip() {
        let reg = ModeRegister::new(3, 2).unwrap();
        for i in 0..reg.dim() {
            assert_eq!(reg.index_of(&reg.occupations(i)), Some(i));
        }
        assert_eq!(reg.index_of(&[0, 0, 1]), Some(1));
        assert_eq!(reg.index_of(&[1, 0, 0]), Some(9));
        assert_eq!(reg.index_of(&[3, 0, 0]), None);
    }
}
