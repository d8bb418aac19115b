use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, PureState, ResidualPolicy, OUTSIDE_LABEL};
use crate::states::{
    agent_ballot_state, ballot_branch, multiparty_survey_state, qutrit_layout, qutrit_site, survey_state,
    tally_measurement_basis, tally_observable, voting_site, BallotParams, SURVEY_VOTER_SITE, TALLY_SITE,
};

/// Residual above which qutrits count as still entangled with the ballot.
pub const DISENTANGLE_TOL: f64 = 1e-10;
/// Trace-distance bound for the per-site privacy invariant.
pub const PRIVACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BallotKind {
    /// Two-mode ballot; every voter uses the shared site `V`.
    Survey,
    /// One voting site `V_i` per voter.
    MultipartySurvey,
    /// Qutrit-restricted votes applied by `agents` ballot agents.
    BinaryAgent { agents: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteValue {
    Amount(i64),
    /// Qutrit register handed to the agents, recorded by its effect on the
    /// ballot phase in units of `δ`.
    Qutrits {
        phase_advance: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Cast,
    Transfer,
    Tally,
}

/// Sorted eigenvalues of the reduced state at each single-party site.
pub type Fingerprint = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionEvent {
    pub step: usize,
    pub event: EventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub voter: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub site: Option<String>,
    /// Present only when the session runs in audit mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<VoteValue>,
    pub fingerprint: Fingerprint,
    /// Largest trace distance between a single-site reduced state and its
    /// value before any vote.
    pub privacy_deviation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TallyResult {
    pub tally: usize,
    /// Born probability of the observed tally.
    pub probability: f64,
    pub raw_expectation: f64,
    pub outcome_distribution: BTreeMap<usize, f64>,
    /// Weight outside the tally subspace (zero for phase-only evolutions).
    pub outside_probability: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transcript {
    #[serde(flatten)]
    pub kind: BallotKind,
    pub params: BallotParams,
    pub events: Vec<SessionEvent>,
    pub final_tally: Option<TallyResult>,
}

/// One run of a survey-style ballot: casts, transfer to the tallyman, and
/// tally readout, in that order.
#[derive(Debug, Clone)]
pub struct BallotSession {
    kind: BallotKind,
    params: BallotParams,
    state: PureState,
    max_voters: usize,
    voters: Vec<String>,
    audit: bool,
    expected_votes: f64,
    transferred: bool,
    baseline: Vec<(String, DensityMatrix)>,
    events: Vec<SessionEvent>,
    final_tally: Option<TallyResult>,
}

impl BallotSession {
    /// Survey on the two-mode state; at most `N` voters share site `V`.
    pub fn survey(params: BallotParams) -> Result<Self> {
        Self::start(BallotKind::Survey, params, survey_state(&params)?, params.n)
    }

    /// Multiparty survey with `K` voting sites; at most `min(N, K)` voters,
    /// each on their own site.
    pub fn multiparty(params: BallotParams) -> Result<Self> {
        let state = multiparty_survey_state(&params)?;
        Self::start(BallotKind::MultipartySurvey, params, state, params.n.min(params.k))
    }

    /// Binary ballot run through `agents` ballot agents; at most `N` voters.
    pub fn binary_agent(params: BallotParams, agents: usize) -> Result<Self> {
        let state = agent_ballot_state(&params, agents)?;
        let params = BallotParams::new(params.n, agents)?;
        Self::start(BallotKind::BinaryAgent { agents }, params, state, params.n)
    }

    fn start(kind: BallotKind, params: BallotParams, state: PureState, max_voters: usize) -> Result<Self> {
        let sites: Vec<String> = state.layout().labels().map(str::to_string).collect();
        let baseline = sites
            .iter()
            .map(|s| Ok((s.clone(), state.partial_trace(&[s])?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind,
            params,
            state,
            max_voters,
            voters: Vec::new(),
            audit: false,
            expected_votes: 0.0,
            transferred: false,
            baseline,
            events: Vec::new(),
            final_tally: None,
        })
    }

    /// Keep vote values in the event log.
    pub fn with_audit(mut self, audit: bool) -> Self {
        self.audit = audit;
        self
    }

    pub fn kind(&self) -> BallotKind {
        self.kind
    }

    pub fn params(&self) -> BallotParams {
        self.params
    }

    pub fn state(&self) -> &PureState {
        &self.state
    }

    pub fn voters(&self) -> &[String] {
        &self.voters
    }

    pub fn max_voters(&self) -> usize {
        self.max_voters
    }

    /// Accumulated vote total in units of `δ`, tracked alongside the state.
    pub fn expected_votes(&self) -> f64 {
        self.expected_votes
    }

    pub fn is_transferred(&self) -> bool {
        self.transferred
    }

    /// Largest privacy deviation recorded so far.
    pub fn max_privacy_deviation(&self) -> f64 {
        self.events.iter().map(|e| e.privacy_deviation).fold(0.0, f64::max)
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            kind: self.kind,
            params: self.params,
            events: self.events.clone(),
            final_tally: self.final_tally.clone(),
        }
    }

    fn check_voter(&self, voter: &str) -> Result<()> {
        if self.transferred {
            return Err(Error::protocol("ballot already transferred to the tallyman"));
        }
        if self.voters.iter().any(|v| v == voter) {
            return Err(Error::protocol(format!("voter `{voter}` has already voted")));
        }
        if self.voters.len() >= self.max_voters {
            return Err(Error::protocol(format!("all {} voter slots are used", self.max_voters)));
        }
        Ok(())
    }

    /// Single-site reduced spectra and the worst deviation from the
    /// pre-vote reduced states.
    fn observe(&self) -> Result<(Fingerprint, f64)> {
        let mut fingerprint = Fingerprint::new();
        let mut worst: f64 = 0.0;
        for (site, before) in &self.baseline {
            let rho = self.state.partial_trace(&[site])?;
            worst = worst.max(rho.trace_distance(before)?);
            fingerprint.insert(site.clone(), rho.eigenvalues());
        }
        Ok((fingerprint, worst))
    }

    fn record(
        &mut self,
        event: EventKind,
        voter: Option<&str>,
        site: Option<String>,
        value: Option<VoteValue>,
    ) -> Result<()> {
        let (fingerprint, privacy_deviation) = if self.transferred {
            (Fingerprint::new(), 0.0)
        } else {
            self.observe()?
        };
        self.events.push(SessionEvent {
            step: self.events.len(),
            event,
            voter: voter.map(str::to_string),
            site,
            value: if self.audit { value } else { None },
            fingerprint,
            privacy_deviation,
        });
        Ok(())
    }

    /// Casts a vote of value `nu` by applying `exp(i N̂ 2πν/(N+1))` at the
    /// voter's site: the shared `V` for a survey, the next free `V_i` for a
    /// multiparty survey.
    pub fn cast(&mut self, voter: &str, nu: i64) -> Result<()> {
        let site = match self.kind {
            BallotKind::Survey => SURVEY_VOTER_SITE.to_string(),
            BallotKind::MultipartySurvey => voting_site(self.voters.len() + 1),
            BallotKind::BinaryAgent { .. } => {
                return Err(Error::protocol("binary ballots take qutrit votes; use cast_qutrits"))
            }
        };
        self.check_voter(voter)?;
        self.voters.push(voter.to_string());
        let angle = self.params.vote_angle(nu);
        self.state = self.state.apply_number_phase(&site, |n| n as f64 * angle)?;
        self.expected_votes += nu as f64;
        self.record(EventKind::Cast, Some(voter), Some(site), Some(VoteValue::Amount(nu)))
    }

    /// Hands a qutrit register to the ballot agents. Agent `i` applies
    /// `exp[i N̂_i δ (1/(2w) + σ_z/2)]` coupling qutrit `q_i` to site `V_i`
    /// (`w` the number of agents), after which the qutrits are split off the
    /// ballot and returned to the voter.
    ///
    /// Fails with [`Error::Entangled`] if the register does not disentangle,
    /// which happens for superpositions of different vote values.
    pub fn cast_qutrits(&mut self, voter: &str, vote_state: &PureState) -> Result<PureState> {
        let BallotKind::BinaryAgent { agents } = self.kind else {
            return Err(Error::protocol("qutrit votes need a binary-agent ballot"));
        };
        if *vote_state.layout() != qutrit_layout(agents)? {
            return Err(Error::protocol(format!(
                "vote register {} does not match {agents} ballot agents",
                vote_state.layout()
            )));
        }
        self.check_voter(voter)?;
        let delta = self.params.delta();
        let (a, b) = agent_coefficients(agents);
        let mut joint = self.state.tensor(vote_state)?;
        for i in 1..=agents {
            joint = joint.apply_conditional_spin_phase(&voting_site(i), &qutrit_site(i), delta * a, delta * b)?;
        }
        let modes: Vec<String> = self.state.layout().labels().map(str::to_string).collect();
        let (ballot, returned) = joint.factorize(&modes, DISENTANGLE_TOL)?;
        self.voters.push(voter.to_string());
        let advance = phase_step(&self.state, &ballot, &self.params)? / delta;
        self.state = ballot;
        self.expected_votes += advance;
        self.record(
            EventKind::Cast,
            Some(voter),
            None,
            Some(VoteValue::Qutrits { phase_advance: advance }),
        )?;
        Ok(returned)
    }

    /// Moves the voting modes to the tallyman. Modelled as a lossless relabel
    /// of each voting site `X` to `T/X`.
    pub fn transfer_to_tallyman(&mut self) -> Result<()> {
        if self.transferred {
            return Err(Error::protocol("ballot already transferred"));
        }
        let renames = self
            .state
            .layout()
            .labels()
            .filter(|l| *l != TALLY_SITE)
            .map(|l| (l.to_string(), format!("{TALLY_SITE}/{l}")))
            .collect();
        self.state = self.state.relabel(&renames)?;
        self.transferred = true;
        self.record(EventKind::Transfer, None, None, None)
    }

    /// Projective measurement in the tally basis, plus the expectation of
    /// the tally operator.
    pub fn tally<R: Rng + ?Sized>(&mut self, policy: ResidualPolicy, rng: &mut R) -> Result<TallyResult> {
        if !self.transferred {
            return Err(Error::protocol("tally requested before the ballot was transferred"));
        }
        if self.final_tally.is_some() {
            return Err(Error::protocol("tally already measured"));
        }
        let result = measure_tally(&self.state, &self.params, policy, rng)?;
        self.final_tally = Some(result.clone());
        self.record(EventKind::Tally, None, None, None)?;
        Ok(result)
    }
}

/// `(a, b)` in `exp[i N̂ δ (a + b σ_z)]` for `agents` ballot agents.
pub fn agent_coefficients(agents: usize) -> (f64, f64) {
    (1.0 / (2 * agents) as f64, 0.5)
}

/// Tally readout on a ballot-structured state.
pub fn measure_tally<R: Rng + ?Sized>(
    state: &PureState,
    params: &BallotParams,
    policy: ResidualPolicy,
    rng: &mut R,
) -> Result<TallyResult> {
    let basis = tally_measurement_basis(params, state.layout())?;
    let observable = tally_observable(params, state.layout())?;
    let out = state.measure_projective(&basis, policy, rng)?;
    let mut outcome_distribution = BTreeMap::new();
    let mut outside_probability = 0.0;
    for (label, p) in &out.distribution {
        if label == OUTSIDE_LABEL {
            outside_probability = *p;
        } else {
            outcome_distribution.insert(label.parse::<usize>().expect("tally labels are integers"), *p);
        }
    }
    let Some(tally) = out.index else {
        return Err(Error::protocol("tally measurement landed outside the ballot subspace"));
    };
    Ok(TallyResult {
        tally,
        probability: out.probability,
        raw_expectation: state.expectation(&observable)?,
        outcome_distribution,
        outside_probability,
    })
}

/// Change of the phase step between branch 0 and branch 1 going from
/// `before` to `after`, wrapped to `(−π, π]`.
pub fn phase_step(before: &PureState, after: &PureState, params: &BallotParams) -> Result<f64> {
    let k = before.layout().num_modes() - 1;
    let ratio = |s: &PureState| -> Result<num_complex::Complex64> {
        let a0 = s.amplitude(&ballot_branch(params.n, k, 0))?;
        let a1 = s.amplitude(&ballot_branch(params.n, k, 1))?;
        Ok(a1 / a0)
    };
    let step = (ratio(after)? / ratio(before)?).arg();
    Ok(if step <= -PI { step + 2.0 * PI } else { step })
}

/// Maps a tally residue in `[0, N]` to a signed value: residues above
/// `N/2` become negative.
pub fn signed_tally(residue: usize, params: &BallotParams) -> i64 {
    let m = params.modulus() as i64;
    let r = residue as i64;
    if 2 * r > params.n as i64 {
        r - m
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{cheat_vote_state, phased_ballot_state, qutrit_vote_state, Vote};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn zero_vote_is_identity() {
        let p = BallotParams::new(4, 1).unwrap();
        let mut s = BallotSession::survey(p).unwrap();
        let before = s.state().clone();
        s.cast("alice", 0).unwrap();
        assert!(s.state().approx_eq_up_to_phase(&before, 1e-12));
    }

    #[test]
    fn two_votes_give_tally_basis_state() {
        let p = BallotParams::new(7, 1).unwrap();
        let mut s = BallotSession::survey(p).unwrap();
        s.cast("a", 2).unwrap();
        s.cast("b", 1).unwrap();
        let basis = crate::states::tally_basis(&p, s.state().layout()).unwrap();
        assert!(s.state().approx_eq_up_to_phase(&basis[3].1, 1e-12));
        assert_eq!(s.expected_votes(), 3.0);
    }

    #[test]
    fn wraparound_tally() {
        let p = BallotParams::new(4, 1).unwrap();
        let mut s = BallotSession::survey(p).unwrap();
        for (v, nu) in [("a", 3), ("b", 4)] {
            s.cast(v, nu).unwrap();
        }
        s.transfer_to_tallyman().unwrap();
        let t = s.tally(ResidualPolicy::Strict, &mut rng()).unwrap();
        assert_eq!(t.tally, 2);
        assert!((t.probability - 1.0).abs() < 1e-9);
        assert!((t.raw_expectation - 2.0).abs() < 1e-9);
    }

    #[test]
    fn survey_tally_three_votes() {
        let p = BallotParams::new(10, 1).unwrap();
        let mut s = BallotSession::survey(p).unwrap();
        for (v, nu) in [("a", 3), ("b", 4), ("c", 2)] {
            s.cast(v, nu).unwrap();
        }
        s.transfer_to_tallyman().unwrap();
        assert_eq!(s.tally(ResidualPolicy::Strict, &mut rng()).unwrap().tally, 9);
        assert!(s.max_privacy_deviation() < PRIVACY_TOL);
    }

    #[test]
    fn empty_ballot_tallies_zero() {
        let mut s = BallotSession::survey(BallotParams::new(3, 1).unwrap()).unwrap();
        s.transfer_to_tallyman().unwrap();
        let t = s.tally(ResidualPolicy::Strict, &mut rng()).unwrap();
        assert_eq!(t.tally, 0);
        assert!(t.raw_expectation.abs() < 1e-9);
    }

    #[test]
    fn protocol_errors() {
        let p = BallotParams::new(2, 1).unwrap();
        let mut s = BallotSession::survey(p).unwrap();
        s.cast("a", 1).unwrap();
        assert!(matches!(s.cast("a", 1), Err(Error::Protocol(_))));
        assert!(matches!(
            s.tally(ResidualPolicy::Strict, &mut rng()),
            Err(Error::Protocol(_))
        ));
        s.cast("b", 1).unwrap();
        assert!(matches!(s.cast("c", 1), Err(Error::Protocol(_))), "only N voters");
        s.transfer_to_tallyman().unwrap();
        assert!(matches!(s.transfer_to_tallyman(), Err(Error::Protocol(_))));
        assert!(s.cast("d", 0).is_err());
    }

    #[test]
    fn multiparty_assigns_distinct_sites() {
        let p = BallotParams::new(3, 2).unwrap();
        let mut s = BallotSession::multiparty(p).unwrap().with_audit(true);
        s.cast("a", 1).unwrap();
        s.cast("b", 2).unwrap();
        let t = s.transcript();
        assert_eq!(t.events[0].site.as_deref(), Some("V1"));
        assert_eq!(t.events[1].site.as_deref(), Some("V2"));
        assert_eq!(t.events[1].value, Some(VoteValue::Amount(2)));
        assert!(s.cast("c", 0).is_err());
        let closed = phased_ballot_state(3, s.state().shared_layout(), |m| m as f64 * p.vote_angle(3)).unwrap();
        assert!(s.state().approx_eq_up_to_phase(&closed, 1e-12));
        s.transfer_to_tallyman().unwrap();
        assert_eq!(s.tally(ResidualPolicy::Strict, &mut rng()).unwrap().tally, 3);
    }

    #[test]
    fn votes_hidden_without_audit() {
        let mut s = BallotSession::survey(BallotParams::new(3, 1).unwrap()).unwrap();
        s.cast("a", 2).unwrap();
        let json = serde_json::to_string(&s.transcript()).unwrap();
        assert!(!json.contains("amount"));
        assert!(json.contains(r#""kind":"survey""#));
    }

    #[test]
    fn binary_agent_honest_votes() {
        for agents in [2, 3] {
            let p = BallotParams::new(4, 1).unwrap();
            let mut s = BallotSession::binary_agent(p, agents).unwrap();
            let yes = qutrit_vote_state(Vote::Yes, agents).unwrap();
            let no = qutrit_vote_state(Vote::No, agents).unwrap();
            let back = s.cast_qutrits("a", &yes).unwrap();
            assert!((back.fidelity(&yes).unwrap() - 1.0).abs() < 1e-12);
            let back = s.cast_qutrits("b", &no).unwrap();
            assert!((back.fidelity(&no).unwrap() - 1.0).abs() < 1e-12);
            s.cast_qutrits("c", &yes).unwrap();
            assert!((s.expected_votes() - 2.0).abs() < 1e-12);
            assert!(s.max_privacy_deviation() < PRIVACY_TOL);
            s.transfer_to_tallyman().unwrap();
            assert_eq!(s.tally(ResidualPolicy::Strict, &mut rng()).unwrap().tally, 2);
        }
    }

    #[test]
    fn binary_agent_cheat_advances_one_and_a_half() {
        let p = BallotParams::new(6, 1).unwrap();
        let mut s = BallotSession::binary_agent(p, 2).unwrap();
        let cheat = cheat_vote_state(2).unwrap();
        let back = s.cast_qutrits("m", &cheat).unwrap();
        assert!((back.fidelity(&cheat).unwrap() - 1.0).abs() < 1e-12);
        assert!((s.expected_votes() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn binary_agent_rejects_wrong_width_and_amounts() {
        let p = BallotParams::new(3, 1).unwrap();
        let mut s = BallotSession::binary_agent(p, 2).unwrap();
        let wide = qutrit_vote_state(Vote::Yes, 3).unwrap();
        assert!(matches!(s.cast_qutrits("a", &wide), Err(Error::Protocol(_))));
        assert!(matches!(s.cast("a", 1), Err(Error::Protocol(_))));
        assert!(s.voters().is_empty());
    }

    #[test]
    fn signed_mapping() {
        let p = BallotParams::new(10, 1).unwrap();
        assert_eq!(signed_tally(9, &p), -2);
        assert_eq!(signed_tally(5, &p), 5);
        assert_eq!(signed_tally(6, &p), -5);
    }
}
