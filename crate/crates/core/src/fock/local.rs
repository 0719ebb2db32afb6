//! Kernels applying an operator that acts on a few modes of a register
//! without ever forming the full-dimension operator.

use nalgebra::{DMatrix, DVector};

use super::{FockError, ModeRegister, C64};

/// Index bookkeeping for an operator on `modes`: `bases` are the register
/// indices whose digits on `modes` are all zero, `offsets[l]` the index shift
/// of local basis state `l` (first listed mode most significant).
pub(crate) struct LocalLayout {
    pub bases: Vec<usize>,
    pub offsets: Vec<usize>,
}

impl LocalLayout {
    pub fn new(reg: &ModeRegister, modes: &[usize]) -> Result<Self, FockError> {
        for (k, &m) in modes.iter().enumerate() {
            reg.check_mode(m)?;
            if modes[..k].contains(&m) {
                return Err(FockError::DuplicateMode(m));
            }
        }
        let levels = reg.levels();
        let local_dim = levels.pow(modes.len() as u32);
        let offsets = (0..local_dim)
            .map(|l| {
                let mut rest = l;
                let mut off = 0;
                for &m in modes.iter().rev() {
                    off += (rest % levels) * reg.stride(m);
                    rest /= levels;
                }
                off
            })
            .collect();
        let bases = (0..reg.dim())
            .filter(|&i| modes.iter().all(|&m| reg.occupation(i, m) == 0))
            .collect();
        Ok(Self { bases, offsets })
    }

    pub fn local_dim(&self) -> usize {
        self.offsets.len()
    }
}

fn check_op(layout: &LocalLayout, op: &DMatrix<C64>) {
    debug_assert_eq!(op.nrows(), layout.local_dim());
    debug_assert_eq!(op.ncols(), layout.local_dim());
}

/// `v ← op v`.
pub(crate) fn apply_local_vec(
    reg: &ModeRegister,
    v: &mut DVector<C64>,
    op: &DMatrix<C64>,
    modes: &[usize],
) -> Result<(), FockError> {
    let layout = LocalLayout::new(reg, modes)?;
    check_op(&layout, op);
    let n = layout.local_dim();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for &base in &layout.bases {
        for (l, off) in layout.offsets.iter().enumerate() {
            buf[l] = v[base + off];
        }
        for (r, off) in layout.offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (l, x) in buf.iter().enumerate() {
                acc += op[(r, l)] * x;
            }
            v[base + off] = acc;
        }
    }
    Ok(())
}

/// `m ← op m`.
pub(crate) fn apply_local_left(
    layout: &LocalLayout,
    m: &mut DMatrix<C64>,
    op: &DMatrix<C64>,
) {
    check_op(layout, op);
    let n = layout.local_dim();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for col in 0..m.ncols() {
        let mut column = m.column_mut(col);
        for &base in &layout.bases {
            for (l, off) in layout.offsets.iter().enumerate() {
                buf[l] = column[base + off];
            }
            for (r, off) in layout.offsets.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (l, x) in buf.iter().enumerate() {
                    acc += op[(r, l)] * x;
                }
                column[base + off] = acc;
            }
        }
    }
}

/// `m ← m op†`.
pub(crate) fn apply_local_right_adjoint(
    layout: &LocalLayout,
    m: &mut DMatrix<C64>,
    op: &DMatrix<C64>,
) {
    check_op(layout, op);
    let n = layout.local_dim();
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for row in 0..m.nrows() {
        for &base in &layout.bases {
            for (l, off) in layout.offsets.iter().enumerate() {
                buf[l] = m[(row, base + off)];
            }
            for (r, off) in layout.offsets.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (l, x) in buf.iter().enumerate() {
                    acc += x * op[(r, l)].conj();
                }
                m[(row, base + off)] = acc;
            }
        }
    }
}

/// `m ← op m op†` for an operator on `modes`.
pub(crate) fn conjugate_local(
    reg: &ModeRegister,
    m: &mut DMatrix<C64>,
    op: &DMatrix<C64>,
    modes: &[usize],
) -> Result<(), FockError> {
    let layout = LocalLayout::new(reg, modes)?;
    apply_local_left(&layout, m, op);
    apply_local_right_adjoint(&layout, m, op);
    Ok(())
}

/// `Σ_k A_k m A_k†` for single- or few-mode Kraus operators.
pub(crate) fn kraus_local(
    reg: &ModeRegister,
    m: &DMatrix<C64>,
    kraus: &[DMatrix<C64>],
    modes: &[usize],
) -> Result<DMatrix<C64>, FockError> {
    let layout = LocalLayout::new(reg, modes)?;
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for k in kraus {
        let mut term = m.clone();
        apply_local_left(&layout, &mut term, k);
        apply_local_right_adjoint(&layout, &mut term, k);
        out += term;
    }
    Ok(out)
}

/// `m ⊗ |0…0⟩⟨0…0|` with `extra` vacuum modes appended after the existing ones.
pub(crate) fn embed_vacuum_matrix(
    reg: &ModeRegister,
    m: &DMatrix<C64>,
    extra: usize,
) -> Result<(ModeRegister, DMatrix<C64>), FockError> {
    let big = reg.extended(extra)?;
    let scale = reg.levels().pow(extra as u32);
    let mut out = DMatrix::zeros(big.dim(), big.dim());
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            out[(r * scale, c * scale)] = m[(r, c)];
        }
    }
    Ok((big, out))
}

pub(crate) fn embed_vacuum_vec(
    reg: &ModeRegister,
    v: &DVector<C64>,
    extra: usize,
) -> Result<(ModeRegister, DVector<C64>), FockError> {
    let big = reg.extended(extra)?;
    let scale = reg.levels().pow(extra as u32);
    let mut out = DVector::zeros(big.dim());
    for (i, x) in v.iter().enumerate() {
        out[i * scale] = *x;
    }
    Ok((big, out))
}
