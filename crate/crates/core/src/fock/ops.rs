use serde::{Deserialize, Serialize};

use super::state::{PureState, ONE, ZERO};
use crate::error::{Error, Result};

/// Unitary operations that voters can apply to a ballot state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Unitary {
    Identity,
    /// `exp(i·angle·N̂)` on a bosonic mode.
    NumberPhase {
        site: String,
        angle: f64,
    },
    /// Maps local level `j` to `permutation[j]`.
    LevelPermutation {
        site: String,
        permutation: Vec<usize>,
    },
    /// Applies each factor in order, first element first.
    Sequence(Vec<Unitary>),
}

impl Unitary {
    pub fn number_phase(site: impl Into<String>, angle: f64) -> Self {
        Unitary::NumberPhase {
            site: site.into(),
            angle,
        }
    }

    /// `self` followed by `next`, i.e. the operator product `next · self`.
    pub fn then(self, next: Unitary) -> Self {
        match self {
            Unitary::Sequence(mut v) => {
                v.push(next);
                Unitary::Sequence(v)
            }
            first => Unitary::Sequence(vec![first, next]),
        }
    }

    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        match self {
            Unitary::Identity => Ok(state.clone()),
            Unitary::NumberPhase { site, angle } => state.apply_number_phase(site, |n| n as f64 * angle),
            Unitary::LevelPermutation { site, permutation } => {
                let d = permutation.len();
                let mut seen = vec![false; d];
                for &p in permutation {
                    if p >= d || std::mem::replace(&mut seen[p], true) {
                        return Err(Error::layout(format!("{permutation:?} is not a permutation")));
                    }
                }
                let mut m = vec![ZERO; d * d];
                for (j, &p) in permutation.iter().enumerate() {
                    m[p * d + j] = ONE;
                }
                state.apply_local(site, &m)
            }
            Unitary::Sequence(ops) => ops.iter().try_fold(state.clone(), |s, op| op.apply(&s)),
        }
    }
}
