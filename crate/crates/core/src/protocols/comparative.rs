use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fock::{DensityMatrix, PureState, ResidualPolicy};
use crate::states::{comparative_basis, comparative_state, Vote, COMPARATIVE_SITES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Same,
    Different,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparativeRun {
    pub result: Comparison,
    /// Born probability of the observed outcome.
    pub probability: f64,
    /// Largest trace distance between a single-site reduced state and `I/2`
    /// over all protocol steps.
    pub max_privacy_deviation: f64,
}

/// A yes vote applies `exp(iπN̂)` at the voter's site; no is the identity.
fn cast(state: &PureState, site: &str, vote: Vote) -> Result<PureState> {
    match vote {
        Vote::Yes => state.apply_number_phase(site, |n| n as f64 * PI),
        Vote::No => Ok(state.clone()),
    }
}

fn privacy_deviation(state: &PureState) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for site in COMPARATIVE_SITES {
        let rho = state.partial_trace(&[site])?;
        let mixed = DensityMatrix::maximally_mixed(rho.layout().clone());
        worst = worst.max(rho.trace_distance(&mixed)?);
    }
    Ok(worst)
}

/// Two voters at `A` and `B` vote on the shared single-particle state; the
/// tallyman measures in the `(|1,0⟩ ± |0,1⟩)/√2` basis and learns only
/// whether the votes agree.
pub fn comparative_run<R: Rng + ?Sized>(vote_a: Vote, vote_b: Vote, rng: &mut R) -> Result<ComparativeRun> {
    let mut state = comparative_state();
    let mut max_dev = privacy_deviation(&state)?;
    for (site, vote) in COMPARATIVE_SITES.into_iter().zip([vote_a, vote_b]) {
        state = cast(&state, site, vote)?;
        max_dev = max_dev.max(privacy_deviation(&state)?);
    }
    let out = state.measure_projective(&comparative_basis(), ResidualPolicy::Strict, rng)?;
    let result = if out.label == "same" {
        Comparison::Same
    } else {
        Comparison::Different
    };
    Ok(ComparativeRun {
        result,
        probability: out.probability,
        max_privacy_deviation: max_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn all_vote_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (a, b, want) in [
            (Vote::Yes, Vote::Yes, Comparison::Same),
            (Vote::Yes, Vote::No, Comparison::Different),
            (Vote::No, Vote::Yes, Comparison::Different),
            (Vote::No, Vote::No, Comparison::Same),
        ] {
            let run = comparative_run(a, b, &mut rng).unwrap();
            assert_eq!(run.result, want, "{a} {b}");
            assert!((run.probability - 1.0).abs() < 1e-12);
            assert!(run.max_privacy_deviation < 1e-12);
        }
    }
}
