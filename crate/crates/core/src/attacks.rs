//! Adversary strategies against the ballots and the checks that expose them.
//!
//! Each strategy has a single-shot function driven by a caller-supplied
//! generator and a Monte Carlo runner that returns an [`AttackReport`].
//! Runners seed trial `i` from `(seed, i)` through [`crate::stats`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::fock::{LocalBasis, MeasurementBasis, PureState, ResidualPolicy, Spin, OUTSIDE_LABEL};
use crate::protocols::{measure_tally, phase_step, BallotSession};
use crate::states::{
    ballot_branch, cheat_vote_state, multiparty_survey_state, phase_grid_angle, phase_measurement_basis, qutrit_site,
    qutrit_vote_state, survey_state, voting_site, BallotParams, Vote, SURVEY_VOTER_SITE,
};
use crate::stats::{
    frequencies, plug_in_mutual_information, run_trials, total_variation, total_variation_sigma, Estimate, Z_SCORE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    Collude,
    AgentSpin,
    CheatVoter,
    MultipartyCollude,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [
        AttackKind::Collude,
        AttackKind::AgentSpin,
        AttackKind::CheatVoter,
        AttackKind::MultipartyCollude,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Collude => "collude",
            AttackKind::AgentSpin => "agent-spin",
            AttackKind::CheatVoter => "cheat-voter",
            AttackKind::MultipartyCollude => "multiparty-collude",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown attack `{s}`"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack: AttackKind,
    pub params: serde_json::Value,
    pub trials: u64,
    pub seed: u64,
    pub z: f64,
    pub estimates: BTreeMap<String, Estimate>,
    /// Exact quantities computed without sampling.
    pub exact: BTreeMap<String, f64>,
    /// Named pass/fail checks on the run.
    pub checks: BTreeMap<String, bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_trial: Option<Vec<serde_json::Value>>,
}

impl AttackReport {
    fn new(attack: AttackKind, params: serde_json::Value, trials: u64, seed: u64) -> Self {
        Self {
            attack,
            params,
            trials,
            seed,
            z: Z_SCORE,
            estimates: BTreeMap::new(),
            exact: BTreeMap::new(),
            checks: BTreeMap::new(),
            per_trial: None,
        }
    }

    fn estimate(&mut self, name: &str, successes: u64, analytic: Option<f64>) {
        let e = Estimate::from_counts(successes, self.trials, analytic);
        self.checks.insert(format!("{name}_within_z_sigma"), e.agrees());
        self.estimates.insert(name.to_string(), e);
    }

    /// True when every recorded check passed.
    pub fn all_checks_pass(&self) -> bool {
        self.checks.values().all(|&ok| ok)
    }
}

fn require_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        Err(Error::protocol("at least one trial is required"))
    } else {
        Ok(())
    }
}

fn phase_outcome<R: Rng + ?Sized>(state: &PureState, site: &str, n: usize, rng: &mut R) -> Result<(usize, PureState)> {
    let out = state.measure_local(&phase_measurement_basis(site, n), rng)?;
    Ok((out.index.expect("local outcomes are indexed"), out.post_state))
}

// ---------------------------------------------------------------- collusion

#[derive(Debug, Clone)]
pub struct CollusionOutcome {
    pub k_first: usize,
    pub k_second: usize,
    /// `(k_second − k_first) mod (N+1)`.
    pub recovered: usize,
    /// Phase `θ_A` found by the first measurement.
    pub theta_a: f64,
    /// State after the second measurement, `|ψ(θ_A)⟩_T |φ(θ_A + Mδ)⟩_V`.
    pub post_state: PureState,
}

/// Two colluding voters bracket the intermediate votes with phase
/// measurements of the shared voting mode.
pub fn collusion_attack<R: Rng + ?Sized>(
    params: &BallotParams,
    intermediate_votes: &[i64],
    rng: &mut R,
) -> Result<CollusionOutcome> {
    let n = params.n;
    let (k_first, mut state) = phase_outcome(&survey_state(params)?, SURVEY_VOTER_SITE, n, rng)?;
    for &nu in intermediate_votes {
        let angle = params.vote_angle(nu);
        state = state.apply_number_phase(SURVEY_VOTER_SITE, |m| m as f64 * angle)?;
    }
    let (k_second, post_state) = phase_outcome(&state, SURVEY_VOTER_SITE, n, rng)?;
    Ok(CollusionOutcome {
        k_first,
        k_second,
        recovered: (k_second + params.modulus() - k_first) % params.modulus(),
        theta_a: phase_grid_angle(n, k_first),
        post_state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumberCheck {
    pub total: usize,
    pub expected: usize,
    pub detected: bool,
    /// `1 − P(total = expected)`.
    pub detection_probability: f64,
}

/// Tallyman's total-number measurement; anything but `expected` flags an
/// attack.
pub fn number_check<R: Rng + ?Sized>(state: &PureState, expected: usize, rng: &mut R) -> NumberCheck {
    let p_ok = state.total_number_distribution().get(&expected).copied().unwrap_or(0.0);
    let (total, _, _) = state.measure_total_number(rng);
    NumberCheck {
        total,
        expected,
        detected: total != expected,
        detection_probability: 1.0 - p_ok,
    }
}

/// Collusion attack followed by the number check, repeated `trials` times.
pub fn collusion_report(
    params: &BallotParams,
    intermediate_votes: &[i64],
    trials: u64,
    seed: u64,
    per_trial: bool,
) -> Result<AttackReport> {
    require_trials(trials)?;
    let target = params.residue(intermediate_votes.iter().sum());
    let records = run_trials(seed, trials, |_, rng| -> Result<_> {
        let out = collusion_attack(params, intermediate_votes, rng)?;
        let check = number_check(&out.post_state, params.n, rng);
        Ok((out.k_first, out.k_second, out.recovered, check))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    // Exact value: average the per-branch detection probability over the
    // outcomes of the first phase measurement.
    let branch = phase_measurement_basis(SURVEY_VOTER_SITE, params.n);
    let (projections, probs) = survey_state(params)?.local_projections(&branch)?;
    let mut analytic = 0.0;
    for (proj, p) in projections.into_iter().zip(probs) {
        let post = proj.normalized()?;
        analytic += p * (1.0 - post.total_number_distribution().get(&params.n).copied().unwrap_or(0.0));
    }

    let mut report = AttackReport::new(
        AttackKind::Collude,
        json!({"n": params.n, "intermediate_votes": intermediate_votes}),
        trials,
        seed,
    );
    let recovered = records.iter().filter(|r| r.2 == target).count() as u64;
    let detected = records.iter().filter(|r| r.3.detected).count() as u64;
    report.estimate("recovery", recovered, Some(1.0));
    report.estimate("detection", detected, Some(analytic));
    report.exact.insert("detection_probability".into(), analytic);
    report.exact.insert("target_tally".into(), target as f64);
    report.checks.insert("recovery_exact".into(), recovered == trials);
    report.checks.insert(
        "detection_matches_formula".into(),
        (analytic - params.n as f64 / params.modulus() as f64).abs() < 1e-12,
    );
    if per_trial {
        report.per_trial = Some(
            records
                .iter()
                .map(|(a, b, r, c)| {
                    json!({"k_first": a, "k_second": b, "recovered_tally": r,
                           "total": c.total, "detected": c.detected})
                })
                .collect(),
        );
    }
    Ok(report)
}

// ------------------------------------------------------- multiparty defence

#[derive(Debug, Clone)]
pub struct MultipartyAttempt {
    pub k_first: usize,
    pub k_second: usize,
    pub check: NumberCheck,
    /// Tally read by the tallyman when the number check passes.
    pub recovered_tally: Option<usize>,
}

const ATTACKER_SITE: usize = 1;
const OTHER_SITE: usize = 2;

fn check_multiparty(params: &BallotParams) -> Result<()> {
    if params.k < 2 {
        return Err(Error::protocol("the multiparty attack needs at least two voting sites"));
    }
    Ok(())
}

/// The attacker owns `V1` and measures its phase before and after the voter
/// at `V2` casts `nu`. The tallyman then runs the number check on the
/// multiparty layout and reads the tally if it passes.
pub fn multiparty_collusion_attempt<R: Rng + ?Sized>(
    params: &BallotParams,
    nu: i64,
    rng: &mut R,
) -> Result<MultipartyAttempt> {
    check_multiparty(params)?;
    let (n, attacker, other) = (params.n, voting_site(ATTACKER_SITE), voting_site(OTHER_SITE));
    let (k_first, state) = phase_outcome(&multiparty_survey_state(params)?, &attacker, n, rng)?;
    let angle = params.vote_angle(nu);
    let state = state.apply_number_phase(&other, |m| m as f64 * angle)?;
    let (k_second, state) = phase_outcome(&state, &attacker, n, rng)?;
    let expected = params.k * n;
    let p_ok = state.total_number_distribution().get(&expected).copied().unwrap_or(0.0);
    let (total, _, post) = state.measure_total_number(rng);
    let check = NumberCheck {
        total,
        expected,
        detected: total != expected,
        detection_probability: 1.0 - p_ok,
    };
    let recovered_tally = if check.detected {
        None
    } else {
        Some(measure_tally(&post, params, ResidualPolicy::Strict, rng)?.tally)
    };
    Ok(MultipartyAttempt {
        k_first,
        k_second,
        check,
        recovered_tally,
    })
}

/// Exact distribution of the attacker's record `(k_first, k_second)`,
/// flattened as `k_first·(N+1) + k_second`.
pub fn multiparty_observable_distribution(params: &BallotParams, nu: i64) -> Result<Vec<f64>> {
    check_multiparty(params)?;
    let (n, m) = (params.n, params.modulus());
    let (attacker, other) = (voting_site(ATTACKER_SITE), voting_site(OTHER_SITE));
    let basis = phase_measurement_basis(&attacker, n);
    let angle = params.vote_angle(nu);
    let mut dist = vec![0.0; m * m];
    let (first, p_first) = multiparty_survey_state(params)?.local_projections(&basis)?;
    for (a, (proj, pa)) in first.into_iter().zip(p_first).enumerate() {
        if pa <= 0.0 {
            continue;
        }
        let state = proj.normalized()?.apply_number_phase(&other, |k| k as f64 * angle)?;
        let (_, p_second) = state.local_projections(&basis)?;
        for (b, pb) in p_second.into_iter().enumerate() {
            dist[a * m + b] += pa * pb;
        }
    }
    Ok(dist)
}

/// Exact detection probability of the number check after the attack.
pub fn multiparty_detection_probability(params: &BallotParams) -> Result<f64> {
    check_multiparty(params)?;
    let basis = phase_measurement_basis(&voting_site(ATTACKER_SITE), params.n);
    let (projections, probs) = multiparty_survey_state(params)?.local_projections(&basis)?;
    let expected = params.k * params.n;
    let mut p = 0.0;
    for (proj, pa) in projections.into_iter().zip(probs) {
        if pa > 0.0 {
            let post = proj.normalized()?;
            p += pa * (1.0 - post.total_number_distribution().get(&expected).copied().unwrap_or(0.0));
        }
    }
    Ok(p)
}

/// Monte Carlo over the multiparty attack with the other voter's value drawn
/// uniformly from `0..=N` in each trial.
///
/// The attacker's record `(k_first, k_second)` is histogrammed per vote
/// value. Independence is reported three ways: the exact largest
/// total-variation distance between vote values, the empirical one with its
/// noise scale, and a plug-in mutual information between vote and record.
/// The plug-in estimate is biased upward by about `(|X|−1)(|Y|−1)/(2·trials)`
/// nats, reported as `mutual_information_bias`.
pub fn multiparty_collusion_report(
    params: &BallotParams,
    trials: u64,
    seed: u64,
    per_trial: bool,
) -> Result<AttackReport> {
    require_trials(trials)?;
    check_multiparty(params)?;
    let m = params.modulus();
    let records = run_trials(seed, trials, |_, rng| -> Result<_> {
        let nu = rng.random_range(0..m) as i64;
        Ok((nu, multiparty_collusion_attempt(params, nu, rng)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let exact: Vec<Vec<f64>> = (0..m as i64)
        .map(|nu| multiparty_observable_distribution(params, nu))
        .collect::<Result<_>>()?;
    let mut counts = vec![vec![0u64; m * m]; m];
    for (nu, a) in &records {
        counts[*nu as usize][a.k_first * m + a.k_second] += 1;
    }

    let mut analytic_tv: f64 = 0.0;
    let mut empirical_tv: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_sigma = f64::INFINITY;
    for a in 0..m {
        for b in a + 1..m {
            analytic_tv = analytic_tv.max(total_variation(&exact[a], &exact[b]));
            let tv = total_variation(&frequencies(&counts[a]), &frequencies(&counts[b]));
            let sigma = total_variation_sigma(&counts[a], &counts[b]);
            if tv / sigma > worst_ratio || worst_ratio == 0.0 {
                worst_ratio = tv / sigma;
                worst_sigma = sigma;
            }
            empirical_tv = empirical_tv.max(tv);
        }
    }
    let support = counts
        .iter()
        .flat_map(|row| row.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, _)| i))
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let mi = plug_in_mutual_information(&counts);
    let mi_bias = (m.saturating_sub(1) * support.saturating_sub(1)) as f64 / (2.0 * trials as f64);

    let detection = multiparty_detection_probability(params)?;
    let mut report = AttackReport::new(
        AttackKind::MultipartyCollude,
        json!({"n": params.n, "k": params.k, "attacker_site": voting_site(ATTACKER_SITE), "voter_site": voting_site(OTHER_SITE)}),
        trials,
        seed,
    );
    let repeat = records.iter().filter(|(_, a)| a.k_first == a.k_second).count() as u64;
    let detected = records.iter().filter(|(_, a)| a.check.detected).count() as u64;
    report.estimate("repeat_measurement_agrees", repeat, Some(1.0));
    report.estimate("detection", detected, Some(detection));
    let passed: Vec<_> = records.iter().filter(|(_, a)| !a.check.detected).collect();
    let recovered = passed
        .iter()
        .filter(|(nu, a)| a.recovered_tally == Some(params.residue(*nu)))
        .count();
    report.exact.insert("analytic_max_tv".into(), analytic_tv);
    report.exact.insert("empirical_max_tv".into(), empirical_tv);
    report.exact.insert("max_tv_sigma_ratio".into(), worst_ratio);
    report.exact.insert("tv_sigma_at_worst_pair".into(), worst_sigma);
    report.exact.insert("mutual_information_nats".into(), mi);
    report.exact.insert("mutual_information_bias".into(), mi_bias);
    report.exact.insert("detection_probability".into(), detection);
    report.exact.insert("passed_checks".into(), passed.len() as f64);
    report.checks.insert("analytic_tv_zero".into(), analytic_tv < 1e-12);
    report
        .checks
        .insert("empirical_tv_below_z_sigma".into(), worst_ratio < Z_SCORE);
    report
        .checks
        .insert("tally_recovered_after_pass".into(), recovered == passed.len());
    if per_trial {
        report.per_trial = Some(
            records
                .iter()
                .map(|(nu, a)| {
                    json!({"vote": nu, "k_first": a.k_first, "k_second": a.k_second,
                           "total": a.check.total, "detected": a.check.detected,
                           "recovered_tally": a.recovered_tally})
                })
                .collect(),
        );
    }
    Ok(report)
}

// ------------------------------------------------------------- agent attacks

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Learned {
    Yes,
    No,
    Nothing,
}

#[derive(Debug, Clone)]
pub struct SpinAttack {
    pub outcome: Spin,
    pub learned: Learned,
    pub probability: f64,
    pub post_qutrits: PureState,
}

/// Ballot agent `agent` measures `σ_z` of its qutrit in the register it
/// handles.
pub fn spin_measurement<R: Rng + ?Sized>(register: &PureState, agent: usize, rng: &mut R) -> Result<SpinAttack> {
    let out = register.measure_local(&LocalBasis::spin_z(qutrit_site(agent)), rng)?;
    let outcome = Spin::ALL[out.index.expect("local outcomes are indexed")];
    let learned = match outcome {
        Spin::Up => Learned::Yes,
        Spin::Down => Learned::No,
        Spin::Zero => Learned::Nothing,
    };
    Ok(SpinAttack {
        outcome,
        learned,
        probability: out.probability,
        post_qutrits: out.post_state,
    })
}

/// The first ballot agent measures `σ_z` on an honest `vote` register of the
/// given width.
pub fn agent_spin_attack<R: Rng + ?Sized>(vote: Vote, width: usize, rng: &mut R) -> Result<SpinAttack> {
    spin_measurement(&qutrit_vote_state(vote, width)?, 1, rng)
}

/// `P(outcome ≠ 0)` for one agent measuring an honest register.
pub fn reveal_probability(vote: Vote, width: usize) -> Result<f64> {
    let dist = qutrit_vote_state(vote, width)?.local_outcome_probabilities(&LocalBasis::spin_z(qutrit_site(1)))?;
    Ok(dist.iter().filter(|(label, _)| label != "0").map(|(_, p)| p).sum())
}

/// `P(vote | outcome 0)` under a uniform prior on yes/no.
pub fn zero_outcome_posterior(width: usize) -> Result<BTreeMap<Vote, f64>> {
    let basis = LocalBasis::spin_z(qutrit_site(1));
    let p0 = |v: Vote| -> Result<f64> {
        let dist = qutrit_vote_state(v, width)?.local_outcome_probabilities(&basis)?;
        Ok(dist.into_iter().find(|(l, _)| l == "0").map_or(0.0, |(_, p)| p))
    };
    let (yes, no) = (p0(Vote::Yes)?, p0(Vote::No)?);
    Ok(BTreeMap::from([
        (Vote::Yes, yes / (yes + no)),
        (Vote::No, no / (yes + no)),
    ]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TamperVerdict {
    Clean,
    Tampered,
}

/// Voter's projective test `{|e⟩⟨e|, I − |e⟩⟨e|}` of the returned register
/// against the state `expected` that was sent.
pub fn tamper_check<R: Rng + ?Sized>(returned: &PureState, expected: &PureState, rng: &mut R) -> Result<TamperVerdict> {
    let basis = MeasurementBasis::new(vec![("clean".to_string(), expected.clone())])?;
    let out = returned.measure_projective(&basis, ResidualPolicy::Outcome, rng)?;
    Ok(if out.label == OUTSIDE_LABEL {
        TamperVerdict::Tampered
    } else {
        TamperVerdict::Clean
    })
}

/// Exact probability that the tamper check fires after the first
/// `measured_agents` agents each measure `σ_z` on an honest register.
pub fn tamper_probability_after_spin(vote: Vote, width: usize, measured_agents: usize) -> Result<f64> {
    if measured_agents > width {
        return Err(Error::protocol(format!(
            "cannot measure {measured_agents} qutrits in a register of width {width}"
        )));
    }
    let original = qutrit_vote_state(vote, width)?;
    let mut branches = vec![(1.0, original.clone())];
    for agent in 1..=measured_agents {
        let basis = LocalBasis::spin_z(qutrit_site(agent));
        let mut next = Vec::new();
        for (p, state) in branches {
            let (projections, probs) = state.local_projections(&basis)?;
            for (proj, q) in projections.into_iter().zip(probs) {
                if q > 0.0 {
                    next.push((p * q, proj.normalized()?));
                }
            }
        }
        branches = next;
    }
    branches
        .into_iter()
        .map(|(p, s)| Ok(p * (1.0 - s.fidelity(&original)?)))
        .sum()
}

/// Vote, agent outcome, what it learned, pre- and post-attack verdicts, and
/// the phase advance the returned register applied.
type SpinRecord = (Vote, Spin, Learned, TamperVerdict, TamperVerdict, f64);

/// One agent of `width` measures each honest vote before the ballot uses
/// it; the voter checks the returned register. Votes are drawn uniformly.
pub fn agent_spin_report(
    params: &BallotParams,
    width: usize,
    trials: u64,
    seed: u64,
    per_trial: bool,
) -> Result<AttackReport> {
    require_trials(trials)?;
    let records = run_trials(seed, trials, |_, rng| -> Result<_> {
        let vote = if rng.random::<bool>() { Vote::Yes } else { Vote::No };
        let register = qutrit_vote_state(vote, width)?;
        let pre = tamper_check(&register, &register, rng)?;
        let attack = spin_measurement(&register, 1, rng)?;
        let mut session = BallotSession::binary_agent(*params, width)?;
        let returned = session.cast_qutrits("voter", &attack.post_qutrits)?;
        let post = tamper_check(&returned, &register, rng)?;
        Ok((
            vote,
            attack.outcome,
            attack.learned,
            pre,
            post,
            session.expected_votes(),
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let reveal = reveal_probability(Vote::Yes, width)?;
    let tamper = tamper_probability_after_spin(Vote::Yes, width, 1)?;
    let tamper_all = tamper_probability_after_spin(Vote::Yes, width, width)?;
    let posterior = zero_outcome_posterior(width)?;

    let mut report = AttackReport::new(
        AttackKind::AgentSpin,
        json!({"n": params.n, "width": width}),
        trials,
        seed,
    );
    let count = |f: &dyn Fn(&SpinRecord) -> bool| records.iter().filter(|r| f(r)).count() as u64;
    report.estimate("reveal", count(&|r| r.2 != Learned::Nothing), Some(reveal));
    report.estimate(
        "tamper_detected_after_attack",
        count(&|r| r.4 == TamperVerdict::Tampered),
        Some(tamper),
    );
    report.estimate(
        "tamper_detected_without_attack",
        count(&|r| r.3 == TamperVerdict::Tampered),
        Some(0.0),
    );
    let wrong = count(&|r| match r.2 {
        Learned::Yes => r.0 != Vote::Yes,
        Learned::No => r.0 != Vote::No,
        Learned::Nothing => false,
    });
    report.exact.insert("reveal_probability".into(), reveal);
    report.exact.insert("tamper_probability_one_agent".into(), tamper);
    report.exact.insert("tamper_probability_all_agents".into(), tamper_all);
    report
        .exact
        .insert("posterior_yes_given_zero".into(), posterior[&Vote::Yes]);
    report
        .exact
        .insert("expected_detections".into(), tamper * trials as f64);
    report.checks.insert("revealed_votes_correct".into(), wrong == 0);
    report.checks.insert(
        "zero_outcome_posterior_uniform".into(),
        (posterior[&Vote::Yes] - 0.5).abs() < 1e-12,
    );
    if per_trial {
        report.per_trial = Some(
            records
                .iter()
                .map(|(vote, outcome, learned, pre, post, advance)| {
                    json!({"vote": vote, "qutrit_outcome": outcome, "learned": learned,
                           "tamper_without_attack": pre, "tamper_after_attack": post,
                           "phase_advance": advance})
                })
                .collect(),
        );
    }
    Ok(report)
}

// --------------------------------------------------------------- cheat vote

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseAdvance {
    /// Advance per occupation quantum in units of `δ`, read from branch 1.
    pub advance: f64,
    /// Largest deviation of any branch amplitude ratio from
    /// `exp(i m · advance · δ)`.
    pub max_branch_error: f64,
}

/// Casts `register` into a fresh binary ballot and reads the phase advance
/// from ratios of branch amplitudes.
pub fn phase_advance(params: &BallotParams, register: &PureState) -> Result<PhaseAdvance> {
    let width = register.layout().num_qutrits();
    let mut session = BallotSession::binary_agent(*params, width)?;
    let before = session.state().clone();
    session.cast_qutrits("voter", register)?;
    let after = session.state();
    let delta = params.delta();
    let advance = phase_step(&before, after, params)? / delta;
    let mut max_branch_error: f64 = 0.0;
    for m in 0..=params.n {
        let b = ballot_branch(params.n, width, m);
        let ratio = after.amplitude(&b)? / before.amplitude(&b)?;
        let want = num_complex::Complex64::from_polar(1.0, m as f64 * advance * delta);
        max_branch_error = max_branch_error.max((ratio - want).norm());
    }
    Ok(PhaseAdvance {
        advance,
        max_branch_error,
    })
}

/// The cheat register `|+1,…,+1⟩` against an honest yes: ballot gain,
/// determinism of an agent's `σ_z` reading, and the cheater's own tamper
/// check.
pub fn cheat_vote_analysis(
    params: &BallotParams,
    width: usize,
    trials: u64,
    seed: u64,
    per_trial: bool,
) -> Result<AttackReport> {
    require_trials(trials)?;
    let cheat = cheat_vote_state(width)?;
    let honest = phase_advance(params, &qutrit_vote_state(Vote::Yes, width)?)?;
    let cheated = phase_advance(params, &cheat)?;
    let records = run_trials(seed, trials, |_, rng| -> Result<_> {
        let attack = spin_measurement(&cheat, 1, rng)?;
        let fidelity = attack.post_qutrits.fidelity(&cheat)?;
        let mut session = BallotSession::binary_agent(*params, width)?;
        let returned = session.cast_qutrits("cheater", &attack.post_qutrits)?;
        let verdict = tamper_check(&returned, &cheat, rng)?;
        Ok((attack.outcome, fidelity, verdict))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let p_up = cheat
        .local_outcome_probabilities(&LocalBasis::spin_z(qutrit_site(1)))?
        .into_iter()
        .find(|(l, _)| l == "+1")
        .map_or(0.0, |(_, p)| p);
    let min_fidelity = records.iter().map(|r| r.1).fold(1.0, f64::min);

    let mut report = AttackReport::new(
        AttackKind::CheatVoter,
        json!({"n": params.n, "width": width}),
        trials,
        seed,
    );
    report.estimate(
        "agent_reads_up",
        records.iter().filter(|r| r.0 == Spin::Up).count() as u64,
        Some(p_up),
    );
    report.estimate(
        "tamper_detected",
        records.iter().filter(|r| r.2 == TamperVerdict::Tampered).count() as u64,
        Some(0.0),
    );
    // Every agent adds `a + b = 1/(2w) + 1/2`.
    let want = 0.5 + width as f64 / 2.0;
    report.exact.insert("cheat_phase_advance".into(), cheated.advance);
    report
        .exact
        .insert("cheat_branch_error".into(), cheated.max_branch_error);
    report.exact.insert("honest_yes_phase_advance".into(), honest.advance);
    report.exact.insert("agent_up_probability".into(), p_up);
    report
        .exact
        .insert("min_post_measurement_fidelity".into(), min_fidelity);
    report.checks.insert(
        "cheat_gain_exact".into(),
        ((cheated.advance - want) / want).abs() < 1e-12 && cheated.max_branch_error < 1e-12,
    );
    report
        .checks
        .insert("honest_yes_is_one_vote".into(), (honest.advance - 1.0).abs() < 1e-12);
    report
        .checks
        .insert("agent_reading_deterministic".into(), (p_up - 1.0).abs() < 1e-12);
    report.checks.insert(
        "agent_reading_non_disturbing".into(),
        (min_fidelity - 1.0).abs() < 1e-12,
    );
    let no_evidence = report.estimates["tamper_detected"].successes == 0;
    report.checks.insert(
        "gain_without_tamper_evidence".into(),
        report.checks["cheat_gain_exact"] && no_evidence,
    );
    if per_trial {
        report.per_trial = Some(
            records
                .iter()
                .map(|(outcome, fidelity, verdict)| {
                    json!({"qutrit_outcome": outcome, "post_fidelity": fidelity, "tamper": verdict})
                })
                .collect(),
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collusion_recovers_intermediate_sum() {
        let p = BallotParams::new(7, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let out = collusion_attack(&p, &[2, 3], &mut rng).unwrap();
            assert_eq!(out.recovered, 5);
        }
        let out = collusion_attack(&p, &[], &mut rng).unwrap();
        assert_eq!(out.k_first, out.k_second);
    }

    #[test]
    fn number_check_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (n, want) in [(3, 0.75), (9, 0.9)] {
            let p = BallotParams::new(n, 1).unwrap();
            let out = collusion_attack(&p, &[1], &mut rng).unwrap();
            let check = number_check(&out.post_state, n, &mut rng);
            assert!((check.detection_probability - want).abs() < 1e-12);
            let honest = number_check(&survey_state(&p).unwrap(), n, &mut rng);
            assert!(!honest.detected);
            assert!(honest.detection_probability.abs() < 1e-12);
        }
    }

    #[test]
    fn reveal_and_tamper_probabilities() {
        for vote in [Vote::Yes, Vote::No] {
            assert!((reveal_probability(vote, 2).unwrap() - 0.5).abs() < 1e-12);
            assert!((reveal_probability(vote, 3).unwrap() - 1.0 / 3.0).abs() < 1e-12);
            assert!((tamper_probability_after_spin(vote, 2, 1).unwrap() - 0.5).abs() < 1e-12);
            assert!((tamper_probability_after_spin(vote, 3, 1).unwrap() - 4.0 / 9.0).abs() < 1e-12);
            assert!((tamper_probability_after_spin(vote, 3, 3).unwrap() - 2.0 / 3.0).abs() < 1e-12);
            assert!(tamper_probability_after_spin(vote, 3, 0).unwrap().abs() < 1e-12);
        }
        for width in [2, 3] {
            let post = zero_outcome_posterior(width).unwrap();
            assert!((post[&Vote::Yes] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn multiparty_record_is_vote_independent() {
        let p = BallotParams::new(3, 2).unwrap();
        let base = multiparty_observable_distribution(&p, 0).unwrap();
        assert!((base.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for nu in 1..=3 {
            let d = multiparty_observable_distribution(&p, nu).unwrap();
            assert!(total_variation(&base, &d) < 1e-12);
        }
        assert!((multiparty_detection_probability(&p).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn cheat_register_gains_half_a_vote() {
        let p = BallotParams::new(4, 2).unwrap();
        let a = phase_advance(&p, &cheat_vote_state(2).unwrap()).unwrap();
        assert!((a.advance - 1.5).abs() < 1e-12);
        assert!(a.max_branch_error < 1e-12);
        let r = cheat_vote_analysis(&p, 2, 50, 9, false).unwrap();
        assert!(r.all_checks_pass(), "{:?}", r.checks);
    }

    #[test]
    fn attack_kind_round_trip() {
        for k in AttackKind::ALL {
            assert_eq!(k.name().parse::<AttackKind>().unwrap(), k);
            assert_eq!(serde_json::to_value(k).unwrap(), json!(k.name()));
        }
    }
}
