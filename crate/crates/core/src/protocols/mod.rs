//! Ballot protocols: the comparative ballot, the anonymous survey (two-mode
//! and multiparty) and the agent-mediated binary ballot.

mod anonymity;
mod comparative;
mod session;

pub use anonymity::{anonymity_gap, commutator_check, double_vote_fidelity, double_vote_gap};
pub use comparative::{comparative_run, ComparativeRun, Comparison};
pub use session::{
    agent_coefficients, measure_tally, phase_step, signed_tally, BallotKind, BallotSession, EventKind, Fingerprint,
    SessionEvent, TallyResult, Transcript, VoteValue, DISENTANGLE_TOL, PRIVACY_TOL,
};
