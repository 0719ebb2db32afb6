use nalgebra::{DMatrix, SymmetricEigen};

use super::local::{embed_vacuum_matrix, LocalLayout};
use super::optics::LinearOpticsElement;
use super::state::{FockState, PureState};
use super::{tol, FockError, ModeRegister, C64};

/// Density operator over a truncated multimode Fock register.
///
/// Construction through [`DensityOperator::new`] checks Hermiticity, unit
/// trace and numerical positivity; states failing the checks are rejected
/// rather than clipped.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    register: ModeRegister,
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    pub fn new(register: ModeRegister, matrix: DMatrix<C64>) -> Result<Self, FockError> {
        let rho = Self::from_parts_unchecked(register, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Shape-checked but otherwise unvalidated; used for channel outputs.
    pub(crate) fn from_parts_unchecked(
        register: ModeRegister,
        matrix: DMatrix<C64>,
    ) -> Result<Self, FockError> {
        if matrix.nrows() != register.dim() || matrix.ncols() != register.dim() {
            return Err(FockError::ShapeMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                dimension: register.dim(),
            });
        }
        Ok(Self { register, matrix })
    }

    pub fn from_pure(state: &PureState) -> Self {
        let v = state.amplitudes();
        Self { register: *state.register(), matrix: v * v.adjoint() }
    }

    pub fn vacuum(register: ModeRegister) -> Self {
        Self::from_pure(&PureState::vacuum(register))
    }

    pub fn fock(register: ModeRegister, occupations: &[usize]) -> Result<Self, FockError> {
        Ok(Self::from_pure(&PureState::fock(register, occupations)?))
    }

    /// Convex mixture `Σ w_k ρ_k` on a shared register; weights are normalised.
    pub fn mixture(parts: &[(f64, DensityOperator)]) -> Result<Self, FockError> {
        let Some((_, first)) = parts.first() else {
            return Err(FockError::ZeroWeight(0.0));
        };
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if total <= 0.0 {
            return Err(FockError::ZeroWeight(total));
        }
        let mut m = DMatrix::zeros(first.register.dim(), first.register.dim());
        for (w, rho) in parts {
            if rho.register != first.register {
                return Err(FockError::RegisterMismatch("mixture components".into()));
            }
            m += &rho.matrix * C64::new(*w / total, 0.0);
        }
        Self::new(first.register, m)
    }

    pub fn register(&self) -> &ModeRegister {
        &self.register
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.register.dim()
    }

    /// `⟨row|ρ|col⟩`; zero for occupations beyond the cutoff.
    pub fn element(&self, row: &[usize], col: &[usize]) -> C64 {
        match (self.register.index_of(row), self.register.index_of(col)) {
            (Some(r), Some(c)) => self.matrix[(r, c)],
            _ => C64::new(0.0, 0.0),
        }
    }

    pub fn population(&self, occupations: &[usize]) -> f64 {
        self.element(occupations, occupations).re
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for c in 0..n {
            for r in 0..=c {
                worst = worst.max((self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), FockError> {
        let herm = self.hermiticity_error();
        if herm > tol::HERMITIAN {
            return Err(FockError::NotHermitian(herm));
        }
        let tr = self.matrix.trace();
        if (tr.re - 1.0).abs() > tol::TRACE || tr.im.abs() > tol::TRACE {
            return Err(FockError::BadTrace(tr.re));
        }
        let min = self.min_eigenvalue();
        if min < -tol::POSITIVITY {
            return Err(FockError::NotPositive(min));
        }
        Ok(())
    }

    /// Divides by the trace.
    pub fn normalized(&self) -> Result<Self, FockError> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(FockError::ZeroWeight(tr));
        }
        Ok(Self { register: self.register, matrix: &self.matrix / C64::new(tr, 0.0) })
    }

    /// `self ⊗ other`; registers must share a cutoff.
    pub fn tensor(&self, other: &DensityOperator) -> Result<Self, FockError> {
        if self.register.cutoff() != other.register.cutoff() {
            return Err(FockError::RegisterMismatch(format!(
                "cutoffs {} and {}",
                self.register.cutoff(),
                other.register.cutoff()
            )));
        }
        let register = self.register.extended(other.register.n_modes())?;
        Ok(Self { register, matrix: self.matrix.kronecker(&other.matrix) })
    }

    pub fn with_vacuum_modes(&self, extra: usize) -> Result<Self, FockError> {
        let (register, matrix) = embed_vacuum_matrix(&self.register, &self.matrix, extra)?;
        Ok(Self { register, matrix })
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self, FockError> {
        partial_trace(self, keep)
    }

    pub fn apply(&self, element: &LinearOpticsElement) -> Result<Self, FockError> {
        let matrix = element.apply_matrix(&self.register, &self.matrix)?;
        Ok(Self { register: self.register, matrix })
    }

    pub fn apply_all(&self, elements: &[LinearOpticsElement]) -> Result<Self, FockError> {
        let mut m = self.matrix.clone();
        for e in elements {
            m = e.apply_matrix(&self.register, &m)?;
        }
        Ok(Self { register: self.register, matrix: m })
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_pure(&self, psi: &PureState) -> Result<f64, FockError> {
        if psi.register() != &self.register {
            return Err(FockError::RegisterMismatch("fidelity".into()));
        }
        let v = psi.amplitudes();
        Ok((v.adjoint() * &self.matrix * v)[(0, 0)].re)
    }
}

impl FockState for DensityOperator {
    fn register(&self) -> &ModeRegister {
        &self.register
    }

    fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }
}

pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub(crate) fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let vecs = &eig.eigenvectors;
    let n = m.nrows();
    let mut d = DMatrix::zeros(n, n);
    for (i, l) in eig.eigenvalues.iter().enumerate() {
        d[(i, i)] = C64::new(l.max(0.0).sqrt(), 0.0);
    }
    vecs * d * vecs.adjoint()
}

/// Reduced state on `keep`, in the order listed.
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator, FockError> {
    if keep.is_empty() {
        return Err(FockError::EmptyKeep);
    }
    let reg = rho.register();
    let layout = LocalLayout::new(reg, keep)?;
    let out_reg = reg.sub(keep.len())?;
    let m = rho.matrix();
    let n = layout.local_dim();
    let mut out = DMatrix::zeros(n, n);
    for (c, oc) in layout.offsets.iter().enumerate() {
        for (r, or) in layout.offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &layout.bases {
                acc += m[(or + t, oc + t)];
            }
            out[(r, c)] = acc;
        }
    }
    DensityOperator::from_parts_unchecked(out_reg, out)
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64, FockError> {
    if rho.register() != sigma.register() {
        return Err(FockError::RegisterMismatch("fidelity".into()));
    }
    Ok(matrix_fidelity(rho.matrix(), sigma.matrix()))
}

pub(crate) fn matrix_fidelity(rho: &DMatrix<C64>, sigma: &DMatrix<C64>) -> f64 {
    let s = psd_sqrt(rho);
    let inner = &s * sigma * &s;
    let root_sum: f64 = hermitian_eigenvalues(&inner)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    root_sum * root_sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::two_mode_squeezed;

    #[test]
    fn rejects_invalid_matrices() {
        let reg = ModeRegister::new(1, 1).unwrap();
        let mut m = DMatrix::from_diagonal_element(2, 2, C64::new(0.5, 0.0));
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(matches!(
            DensityOperator::new(reg, m.clone()),
            Err(FockError::NotHermitian(_))
        ));
        m[(1, 0)] = C64::new(0.1, 0.0);
        assert!(DensityOperator::new(reg, m.clone()).is_ok());
        m[(0, 1)] = C64::new(0.6, 0.0);
        m[(1, 0)] = C64::new(0.6, 0.0);
        assert!(matches!(DensityOperator::new(reg, m), Err(FockError::NotPositive(_))));
        let bad_trace = DMatrix::from_diagonal_element(2, 2, C64::new(0.6, 0.0));
        assert!(matches!(DensityOperator::new(reg, bad_trace), Err(FockError::BadTrace(_))));
    }

    #[test]
    fn partial_trace_of_product_state() {
        let reg = ModeRegister::new(1, 2).unwrap();
        let a = DensityOperator::mixture(&[
            (0.3, DensityOperator::fock(reg, &[0]).unwrap()),
            (0.7, DensityOperator::fock(reg, &[2]).unwrap()),
        ])
        .unwrap();
        let b = DensityOperator::fock(reg, &[1]).unwrap();
        let ab = a.tensor(&b).unwrap();
        let ra = ab.partial_trace(&[0]).unwrap();
        let rb = ab.partial_trace(&[1]).unwrap();
        assert!((ra.matrix() - a.matrix()).norm() < 1e-14);
        assert!((rb.matrix() - b.matrix()).norm() < 1e-14);
        let all = ab.partial_trace(&[0, 1]).unwrap();
        assert!((all.matrix() - ab.matrix()).norm() < 1e-14);
        assert_eq!(ab.partial_trace(&[]).unwrap_err(), FockError::EmptyKeep);
    }

    #[test]
    fn marginal_of_pair_state_is_geometric() {
        let chi: f64 = 0.3;
        let cutoff = 6;
        let rho = two_mode_squeezed(chi, cutoff).unwrap().to_density();
        let marg = rho.partial_trace(&[1]).unwrap();
        // series oracle: p(n) = (1-chi) chi^n / (1 - chi^(cutoff+1))
        let z: f64 = (0..=cutoff).map(|n| (1.0 - chi) * chi.powi(n as i32)).sum();
        for n in 0..=cutoff {
            let expected = (1.0 - chi) * chi.powi(n as i32) / z;
            assert!((marg.population(&[n]) - expected).abs() < 1e-12);
            if n < cutoff {
                let ratio = marg.population(&[n + 1]) / marg.population(&[n]);
                assert!((ratio - chi).abs() < 1e-12);
            }
        }
        // reduced state is diagonal
        for r in 0..=cutoff {
            for c in 0..=cutoff {
                if r != c {
                    assert!(marg.element(&[r], &[c]).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn uhlmann_fidelity_limits() {
        let reg = ModeRegister::new(1, 2).unwrap();
        let a = DensityOperator::fock(reg, &[0]).unwrap();
        let b = DensityOperator::fock(reg, &[1]).unwrap();
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-10);
        assert!(fidelity(&a, &b).unwrap().abs() < 1e-10);
        let mix = DensityOperator::mixture(&[(0.5, a.clone()), (0.5, b)]).unwrap();
        assert!((fidelity(&a, &mix).unwrap() - 0.5).abs() < 1e-10);
    }
}
