use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{wootters_concurrence, EntanglementError};
use crate::fock::{DensityOperator, C64};
use crate::tomography::project;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoccCheck {
    pub c_before: f64,
    pub c_after: f64,
    pub p_tilde_after: f64,
    /// `P̃_after C_after ≤ C_before + tol`.
    pub holds: bool,
}

/// `P̃` and the normalised `{00, 01, 10, 11}` block of a two-mode state,
/// all coherences kept.
pub fn qubit_block(rho: &DensityOperator) -> Result<(f64, DMatrix<C64>), EntanglementError> {
    let m6 = project(rho)?;
    let block = m6.view((0, 0), (4, 4)).into_owned();
    let t = block.trace().re;
    if !(t > 0.0) {
        return Err(EntanglementError::ZeroDenominator("P_tilde"));
    }
    Ok((t, block / C64::new(t, 0.0)))
}

/// Compares Wootters concurrences of the qubit blocks before and after a
/// local operation. The block of `before` is taken as the reference, which
/// is its full concurrence when `before` lives in that block.
pub fn locc_bound_check(
    before: &DensityOperator,
    after: &DensityOperator,
    tol: f64,
) -> Result<LoccCheck, EntanglementError> {
    let (_, b) = qubit_block(before)?;
    let (t, a) = qubit_block(after)?;
    let c_before = wootters_concurrence(&b)?;
    let c_after = wootters_concurrence(&a)?;
    Ok(LoccCheck { c_before, c_after, p_tilde_after: t, holds: t * c_after <= c_before + tol })
}
