//! Phase-insensitive normal-ordered observables, evaluated on Fock
//! populations. Every factor is a function of `a†a` on its mode, so products
//! of factors are ordinary operator products.

use serde::{Deserialize, Serialize};

use super::{FockError, FockState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeFactor {
    /// `:exp(−η a†a): = (1−η)^(a†a)`, the no-click element of a detector of
    /// efficiency `η`.
    NoClick { efficiency: f64 },
    /// `a†^k a^k`.
    FactorialMoment { order: usize },
}

impl ModeFactor {
    /// Value on the number state `|n⟩`.
    pub fn eval(&self, n: usize) -> f64 {
        match *self {
            Self::NoClick { efficiency } => (1.0 - efficiency).powi(n as i32),
            Self::FactorialMoment { order } => {
                if order > n {
                    0.0
                } else {
                    (n - order + 1..=n).fold(1.0, |acc, j| acc * j as f64)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalOrderedTerm {
    pub coefficient: f64,
    /// `(mode, factor)` pairs.
    pub factors: Vec<(usize, ModeFactor)>,
}

/// Real linear combination of products of [`ModeFactor`]s.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalOrderedOp {
    pub terms: Vec<NormalOrderedTerm>,
}

impl NormalOrderedOp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(mut self, coefficient: f64, factors: Vec<(usize, ModeFactor)>) -> Self {
        self.terms.push(NormalOrderedTerm { coefficient, factors });
        self
    }

    /// Value on the basis state with the given occupations.
    pub fn eval(&self, occupations: &[usize]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coefficient
                    * t.factors
                        .iter()
                        .map(|(m, f)| f.eval(occupations[*m]))
                        .product::<f64>()
            })
            .sum()
    }
}

/// `⟨op⟩` on `state`.
///
/// A factorial moment of order above the cutoff is not resolvable on the
/// truncated space and is rejected.
pub fn normal_ordered_expectation<S: FockState>(
    state: &S,
    op: &NormalOrderedOp,
) -> Result<f64, FockError> {
    let reg = *state.register();
    for term in &op.terms {
        for (mode, factor) in &term.factors {
            reg.check_mode(*mode)?;
            match *factor {
                ModeFactor::FactorialMoment { order } if order > reg.cutoff() => {
                    return Err(FockError::Truncation { reach: order, cutoff: reg.cutoff() });
                }
                ModeFactor::NoClick { efficiency } if !(0.0..=1.0).contains(&efficiency) => {
                    return Err(FockError::OutOfUnitInterval { name: "efficiency", value: efficiency });
                }
                _ => {}
            }
        }
    }
    Ok(state
        .populations()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p != 0.0)
        .map(|(i, p)| p * op.eval(&reg.occupations(i)))
        .sum())
}
