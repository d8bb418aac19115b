//! Norm-based anonymity and cheating checks for unitary vote operators.
//!
//! With `Y_A`, `Y_B` the yes-operators of two voters and `|B₀⟩` the ballot,
//! anonymity means `Ω = ‖(Y_A − Y_B)|B₀⟩‖ = 0`. Norms here are ordinary
//! 2-norms; the zero set is the same as for the squared norm.

use crate::error::Result;
use crate::fock::{PureState, Unitary};

/// `Ω = ‖(Y_a − Y_b)|B⟩‖`.
pub fn anonymity_gap(y_a: &Unitary, y_b: &Unitary, ballot: &PureState) -> Result<f64> {
    y_a.apply(ballot)?.distance(&y_b.apply(ballot)?)
}

/// `‖(Y_b Y_a − Y_b²)|B⟩‖`: how far a double vote by `b` is from `a` then
/// `b` voting once each. Equals [`anonymity_gap`] by unitary invariance.
pub fn double_vote_gap(y_a: &Unitary, y_b: &Unitary, ballot: &PureState) -> Result<f64> {
    let honest = y_b.apply(&y_a.apply(ballot)?)?;
    let doubled = y_b.apply(&y_b.apply(ballot)?)?;
    honest.distance(&doubled)
}

/// Fidelity `|⟨·|·⟩|²` between `Y_b Y_a|B⟩` and `Y_b²|B⟩`.
pub fn double_vote_fidelity(y_a: &Unitary, y_b: &Unitary, ballot: &PureState) -> Result<f64> {
    let honest = y_b.apply(&y_a.apply(ballot)?)?;
    let doubled = y_b.apply(&y_b.apply(ballot)?)?;
    honest.fidelity(&doubled)
}

/// `‖(Y_a Y_b − Y_b Y_a)|B⟩‖`.
pub fn commutator_check(y_a: &Unitary, y_b: &Unitary, ballot: &PureState) -> Result<f64> {
    let ab = y_a.apply(&y_b.apply(ballot)?)?;
    let ba = y_b.apply(&y_a.apply(ballot)?)?;
    ab.distance(&ba)
}
