//! JSON scenario runner.
//!
//! A scenario is one JSON document naming the protocol or attack to run and
//! its parameters. [`run_scenario`] returns a [`ScenarioReport`] whose
//! serialization is byte-identical for identical configs apart from the
//! `generated_at_unix` field.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Value};

use crate::attacks::{
    agent_spin_report, cheat_vote_analysis, collusion_report, multiparty_collusion_report, AttackReport,
};
use crate::dcnet::{
    anonymity_exhaustive_check, pad_complexity, run_round, sampled_anonymity, PadSource, EXHAUSTIVE_MAX_DINERS,
};
use crate::error::Error;
use crate::fock::{ResidualPolicy, DEFAULT_DIM_LIMIT};
use crate::protocols::{comparative_run, signed_tally, BallotSession, Comparison, PRIVACY_TOL};
use crate::states::{cheat_vote_state, qutrit_vote_state, BallotParams, Vote};
use crate::stats::{run_trials, trial_rng, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Comparative,
    Survey,
    Multiparty,
    BinaryBallot,
    #[serde(alias = "collude")]
    ColludeDetect,
    AgentSpin,
    CheatVoter,
    MultipartyCollude,
    Dcnet,
    Complexity,
}

impl ScenarioKind {
    /// Scenarios whose outcome depends on sampled randomness.
    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            ScenarioKind::ColludeDetect
                | ScenarioKind::AgentSpin
                | ScenarioKind::CheatVoter
                | ScenarioKind::MultipartyCollude
        )
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("unit variant");
        f.write_str(v.as_str().expect("string tag"))
    }
}

/// One ballot entry: an integer amount, `yes`/`no`, or `cheat` for the
/// all-up qutrit register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum BallotEntry {
    Amount(i64),
    Word(VoteWord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteWord {
    Yes,
    No,
    Cheat,
}

impl<'de> Deserialize<'de> for BallotEntry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => n
                .as_i64()
                .map(BallotEntry::Amount)
                .ok_or_else(|| serde::de::Error::custom(format!("vote {n} is not an integer"))),
            Value::String(s) => match s.to_ascii_lowercase().as_str() {
                "yes" => Ok(BallotEntry::Word(VoteWord::Yes)),
                "no" => Ok(BallotEntry::Word(VoteWord::No)),
                "cheat" => Ok(BallotEntry::Word(VoteWord::Cheat)),
                _ => Err(serde::de::Error::custom(format!(
                    "unknown vote `{s}`, expected yes, no, cheat or an integer"
                ))),
            },
            other => Err(serde::de::Error::custom(format!(
                "vote must be an integer or a word, got {other}"
            ))),
        }
    }
}

impl FromStr for BallotEntry {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(match s.parse::<i64>() {
            Ok(n) => json!(n),
            Err(_) => json!(s),
        })
        .map_err(|e| e.to_string())
    }
}

/// `count` votes drawn independently, value `v` with weight `weights[v]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoteDistribution {
    pub count: usize,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Option<ScenarioKind>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Ballot agents (qutrit register width) for binary ballots and agent attacks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agents: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub votes: Option<Vec<BallotEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vote_distribution: Option<VoteDistribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diners: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payer: Option<usize>,
    /// Voter counts for the pad-complexity table.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub voters: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub signed_tally: bool,
    #[serde(default)]
    pub per_trial: bool,
    #[serde(default)]
    pub strict_basis: bool,
}

/// Failure to run a scenario, classified for the CLI exit code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{source}{}", suggestion.map(|n| format!("; try N <= {n}")).unwrap_or_default())]
    Dimension { source: Error, suggestion: Option<usize> },
    #[error("engine error: {0}")]
    Engine(Error),
}

impl ScenarioError {
    fn config(path: &str, message: impl Into<String>) -> Self {
        ScenarioError::Config {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

type Outcome<T> = std::result::Result<T, ScenarioError>;

impl ScenarioConfig {
    /// Parses a JSON document, reporting the path of the first offending field.
    pub fn from_json(text: &str) -> Outcome<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::Config {
                path: if path.is_empty() { ".".into() } else { path },
                message: e.into_inner().to_string(),
            }
        })
    }

    pub fn kind(&self) -> Outcome<ScenarioKind> {
        self.scenario
            .ok_or_else(|| ScenarioError::config("scenario", "missing scenario name"))
    }

    fn require_n(&self) -> Outcome<usize> {
        match self.n {
            None => Err(ScenarioError::config("N", "missing particle number")),
            Some(0) => Err(ScenarioError::config("N", "must be at least 1")),
            Some(n) => Ok(n),
        }
    }

    fn trials(&self, default: u64) -> Outcome<u64> {
        match self.trials {
            Some(0) => Err(ScenarioError::config("trials", "must be at least 1")),
            Some(t) => Ok(t),
            None => Ok(default),
        }
    }

    /// The seed used for the run. Stochastic scenarios and sampled vote
    /// distributions require one; other scenarios default to 0.
    pub fn effective_seed(&self) -> Outcome<u64> {
        let kind = self.kind()?;
        match self.seed {
            Some(s) => Ok(s),
            None if kind.is_stochastic() => {
                Err(ScenarioError::config("seed", format!("scenario `{kind}` needs a seed")))
            }
            None if self.vote_distribution.is_some() => {
                Err(ScenarioError::config("seed", "a vote distribution needs a seed"))
            }
            None => Ok(0),
        }
    }

    fn policy(&self) -> ResidualPolicy {
        if self.strict_basis {
            ResidualPolicy::Strict
        } else {
            ResidualPolicy::Outcome
        }
    }

    fn integer_votes(&self, seed: u64) -> Outcome<Vec<i64>> {
        match (&self.votes, &self.vote_distribution) {
            (Some(_), Some(_)) => Err(ScenarioError::config(
                "vote_distribution",
                "give either votes or vote_distribution, not both",
            )),
            (Some(votes), None) => votes
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    BallotEntry::Amount(n) => Ok(*n),
                    BallotEntry::Word(_) => Err(ScenarioError::config(
                        &format!("votes[{i}]"),
                        "expected an integer vote",
                    )),
                })
                .collect(),
            (None, Some(dist)) => {
                let index = WeightedIndex::new(&dist.weights)
                    .map_err(|e| ScenarioError::config("vote_distribution.weights", e.to_string()))?;
                let mut rng = trial_rng(seed, u64::MAX);
                Ok((0..dist.count).map(|_| index.sample(&mut rng) as i64).collect())
            }
            (None, None) => Ok(Vec::new()),
        }
    }
}

/// Named exact check recorded in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub scenario: ScenarioKind,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub generated_at_unix: u64,
    /// Exact checks; a failure is an invariant violation.
    pub invariants: Vec<InvariantCheck>,
    /// Sampling-based agreement checks at `z` standard deviations. These can
    /// fail by chance and are not invariants.
    pub statistical_checks: BTreeMap<String, bool>,
    #[serde(flatten)]
    pub results: BTreeMap<String, Value>,
}

impl ScenarioReport {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.results.get(key)
    }

    pub fn violations(&self) -> Vec<&str> {
        self.invariants
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

struct Builder {
    invariants: Vec<InvariantCheck>,
    statistical: BTreeMap<String, bool>,
    results: BTreeMap<String, Value>,
}

impl Builder {
    fn new() -> Self {
        Self {
            invariants: Vec::new(),
            statistical: BTreeMap::new(),
            results: BTreeMap::new(),
        }
    }

    fn check(&mut self, name: &str, passed: bool) {
        self.invariants.push(InvariantCheck {
            name: name.to_string(),
            passed,
        });
    }

    fn put(&mut self, key: &str, value: impl Serialize) {
        self.results
            .insert(key.to_string(), serde_json::to_value(value).expect("results serialize"));
    }

    fn attack(&mut self, report: AttackReport) {
        for (name, &ok) in &report.checks {
            if name.ends_with("_z_sigma") {
                self.statistical.insert(name.clone(), ok);
            } else {
                self.check(name, ok);
            }
        }
        self.put("attack", report);
    }
}

/// Largest `N ≤ n` whose ballot layout fits under the default dimension limit.
fn suggest_n(n: usize, voting_sites: usize) -> Option<usize> {
    (1..n).rev().find(|&m| {
        let tally = (voting_sites * m + 1) as u128;
        let dim = (0..voting_sites).fold(tally, |acc, _| acc.saturating_mul(m as u128 + 1));
        dim <= DEFAULT_DIM_LIMIT as u128
    })
}

fn engine(cfg: &ScenarioConfig, voting_sites: usize) -> impl Fn(Error) -> ScenarioError + '_ {
    move |e| match e {
        Error::Cutoff { .. } | Error::DimensionLimit { .. } => ScenarioError::Dimension {
            suggestion: cfg.n.and_then(|n| suggest_n(n, voting_sites)),
            source: e,
        },
        Error::Protocol(msg) => ScenarioError::Config {
            path: ".".into(),
            message: msg,
        },
        other => ScenarioError::Engine(other),
    }
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Outcome<ScenarioReport> {
    let kind = cfg.kind()?;
    let seed = cfg.effective_seed()?;
    let mut b = Builder::new();
    match kind {
        ScenarioKind::Comparative => comparative(cfg, seed, &mut b)?,
        ScenarioKind::Survey | ScenarioKind::Multiparty => survey(cfg, kind, seed, &mut b)?,
        ScenarioKind::BinaryBallot => binary(cfg, seed, &mut b)?,
        ScenarioKind::ColludeDetect => {
            let n = cfg.require_n()?;
            let votes = cfg.integer_votes(seed)?;
            let params = BallotParams::new(n, 1).map_err(engine(cfg, 1))?;
            let report =
                collusion_report(&params, &votes, cfg.trials(10_000)?, seed, cfg.per_trial).map_err(engine(cfg, 1))?;
            b.attack(report);
        }
        ScenarioKind::AgentSpin => {
            let width = cfg.agents.unwrap_or(2);
            let params = BallotParams::new(cfg.require_n()?, width).map_err(engine(cfg, width))?;
            let report = agent_spin_report(&params, width, cfg.trials(10_000)?, seed, cfg.per_trial)
                .map_err(engine(cfg, width))?;
            b.attack(report);
        }
        ScenarioKind::CheatVoter => {
            let width = cfg.agents.unwrap_or(2);
            let params = BallotParams::new(cfg.require_n()?, width).map_err(engine(cfg, width))?;
            let report = cheat_vote_analysis(&params, width, cfg.trials(1_000)?, seed, cfg.per_trial)
                .map_err(engine(cfg, width))?;
            b.attack(report);
        }
        ScenarioKind::MultipartyCollude => {
            let k = cfg.k.unwrap_or(2);
            let params = BallotParams::new(cfg.require_n()?, k).map_err(engine(cfg, k))?;
            let report = multiparty_collusion_report(&params, cfg.trials(10_000)?, seed, cfg.per_trial)
                .map_err(engine(cfg, k))?;
            b.attack(report);
        }
        ScenarioKind::Dcnet => dcnet(cfg, seed, &mut b)?,
        ScenarioKind::Complexity => complexity(cfg, &mut b)?,
    }
    Ok(ScenarioReport {
        scenario: kind,
        config: cfg.clone(),
        seed,
        generated_at_unix: now_unix(),
        invariants: b.invariants,
        statistical_checks: b.statistical,
        results: b.results,
    })
}

fn comparative(cfg: &ScenarioConfig, seed: u64, b: &mut Builder) -> Outcome<()> {
    let votes = cfg.votes.as_deref().unwrap_or_default();
    let words: Vec<Vote> = votes
        .iter()
        .enumerate()
        .map(|(i, v)| match v {
            BallotEntry::Word(VoteWord::Yes) => Ok(Vote::Yes),
            BallotEntry::Word(VoteWord::No) => Ok(Vote::No),
            _ => Err(ScenarioError::config(
                &format!("votes[{i}]"),
                "comparative votes are yes or no",
            )),
        })
        .collect::<Outcome<_>>()?;
    let [a, bv] = words[..] else {
        return Err(ScenarioError::config(
            "votes",
            "the comparative ballot takes exactly two votes",
        ));
    };
    let run = comparative_run(a, bv, &mut trial_rng(seed, 0)).map_err(engine(cfg, 2))?;
    let want = if a == bv {
        Comparison::Same
    } else {
        Comparison::Different
    };
    b.check("comparison_correct", run.result == want);
    b.check("outcome_certain", (run.probability - 1.0).abs() < 1e-9);
    b.check("privacy_preserved", run.max_privacy_deviation < PRIVACY_TOL);
    b.put("result", run.result);
    b.put("probability", run.probability);
    b.put("max_privacy_deviation", run.max_privacy_deviation);
    Ok(())
}

/// Runs `session` to a tally `trials` times (each trial measures a fresh
/// copy) and records the outcome statistics against `expected`.
fn tally_trials(
    cfg: &ScenarioConfig,
    session: &BallotSession,
    expected: Option<usize>,
    seed: u64,
    b: &mut Builder,
    sites: usize,
) -> Outcome<()> {
    let params = session.params();
    let trials = cfg.trials(1)?;
    let results = run_trials(seed, trials, |_, rng| {
        let mut s = session.clone();
        s.transfer_to_tallyman()?;
        s.tally(cfg.policy(), rng).map(|t| (t, s))
    })
    .into_iter()
    .collect::<crate::Result<Vec<_>>>()
    .map_err(engine(cfg, sites))?;
    let (first, finished) = &results[0];
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for (t, _) in &results {
        *counts.entry(t.tally).or_default() += 1;
    }
    let shown = |t: usize| -> Value {
        if cfg.signed_tally {
            json!(signed_tally(t, &params))
        } else {
            json!(t)
        }
    };
    b.put("tally", shown(first.tally));
    b.put("residue", first.tally);
    b.put("tally_probability", first.probability);
    b.put("raw_expectation", first.raw_expectation);
    b.put("outcome_distribution", &first.outcome_distribution);
    b.put("outside_probability", first.outside_probability);
    b.put("tally_counts", &counts);
    b.put("expected_votes", session.expected_votes());
    b.put("max_privacy_deviation", session.max_privacy_deviation());
    b.put("transcript", finished.transcript());
    b.check("privacy_preserved", session.max_privacy_deviation() < PRIVACY_TOL);
    if let Some(want) = expected {
        let hits = counts.get(&want).copied().unwrap_or(0);
        let analytic = first.outcome_distribution.get(&want).copied().unwrap_or(0.0);
        b.put("expected_tally", shown(want));
        b.put("tally_estimate", Estimate::from_counts(hits, trials, Some(analytic)));
        b.check("tally_matches_votes", hits == trials && (analytic - 1.0).abs() < 1e-9);
    }
    Ok(())
}

fn survey(cfg: &ScenarioConfig, kind: ScenarioKind, seed: u64, b: &mut Builder) -> Outcome<()> {
    let n = cfg.require_n()?;
    let votes = cfg.integer_votes(seed)?;
    let (session, sites) = match kind {
        ScenarioKind::Survey => {
            let params = BallotParams::new(n, 1).map_err(engine(cfg, 1))?;
            (BallotSession::survey(params), 1)
        }
        _ => {
            let k = cfg.k.unwrap_or(votes.len().max(1));
            let params = BallotParams::new(n, k).map_err(engine(cfg, k))?;
            (BallotSession::multiparty(params), k)
        }
    };
    let mut session = session.map_err(engine(cfg, sites))?.with_audit(cfg.per_trial);
    for (i, &nu) in votes.iter().enumerate() {
        session
            .cast(&format!("voter{}", i + 1), nu)
            .map_err(engine(cfg, sites))?;
    }
    let params = session.params();
    b.put("votes", &votes);
    tally_trials(cfg, &session, Some(params.residue(votes.iter().sum())), seed, b, sites)
}

fn binary(cfg: &ScenarioConfig, seed: u64, b: &mut Builder) -> Outcome<()> {
    let n = cfg.require_n()?;
    let width = cfg.agents.unwrap_or(2);
    let params = BallotParams::new(n, width).map_err(engine(cfg, width))?;
    let mut session = BallotSession::binary_agent(params, width)
        .map_err(engine(cfg, width))?
        .with_audit(cfg.per_trial);
    let mut returned_ok = true;
    for (i, entry) in cfg.votes.as_deref().unwrap_or_default().iter().enumerate() {
        let register = match entry {
            BallotEntry::Word(VoteWord::Yes) => qutrit_vote_state(Vote::Yes, width),
            BallotEntry::Word(VoteWord::No) => qutrit_vote_state(Vote::No, width),
            BallotEntry::Word(VoteWord::Cheat) => cheat_vote_state(width),
            BallotEntry::Amount(_) => {
                return Err(ScenarioError::config(
                    &format!("votes[{i}]"),
                    "binary votes are yes, no or cheat",
                ))
            }
        }
        .map_err(engine(cfg, width))?;
        let back = session
            .cast_qutrits(&format!("voter{}", i + 1), &register)
            .map_err(engine(cfg, width))?;
        returned_ok &= back.approx_eq_up_to_phase(&register, 1e-10);
    }
    b.check("qutrits_returned_unchanged", returned_ok);
    let expected = session.expected_votes();
    let integral = (expected - expected.round()).abs() < 1e-9;
    let want = integral.then(|| params.residue(expected.round() as i64));
    tally_trials(cfg, &session, want, seed, b, width)
}

fn dcnet(cfg: &ScenarioConfig, seed: u64, b: &mut Builder) -> Outcome<()> {
    let n = cfg.diners.unwrap_or(3);
    if n < 3 {
        return Err(ScenarioError::config("diners", "at least 3 diners are needed"));
    }
    if let Some(p) = cfg.payer.filter(|&p| p >= n) {
        return Err(ScenarioError::config(
            "payer",
            format!("payer {p} is not one of the {n} diners"),
        ));
    }
    let trials = cfg.trials(1)?;
    let rounds = run_trials(seed, trials, |_, rng| run_round(n, cfg.payer, PadSource::Random(rng)))
        .into_iter()
        .collect::<crate::Result<Vec<_>>>()
        .map_err(engine(cfg, 0))?;
    let correct = rounds.iter().filter(|r| r.broadcast() == cfg.payer.is_some()).count() as u64;
    b.check("broadcast_correct", correct == trials);
    b.check("pad_count", rounds.iter().all(|r| r.pads.len() == n * (n - 1) / 2));
    b.put("sum", rounds[0].broadcast() as u8);
    b.put(
        "announcements",
        rounds[0].announcements.iter().map(|&x| x as u8).collect::<Vec<_>>(),
    );
    b.put("rounds_correct", correct);
    b.put("pads_per_round", n * (n - 1) / 2);
    if n <= EXHAUSTIVE_MAX_DINERS {
        let exact = anonymity_exhaustive_check(n).map_err(engine(cfg, 0))?;
        b.check("exhaustive_anonymity", exact);
        b.put("exhaustive_anonymity", exact);
    }
    let sampled = sampled_anonymity(n, 0, (1, 2), trials.max(1000), seed).map_err(engine(cfg, 0))?;
    b.statistical
        .insert("sampled_anonymity_within_z_sigma".into(), sampled.within_z_sigma);
    b.check("sampled_broadcast_correct", sampled.broadcast_errors == 0);
    b.put("sampled_anonymity", sampled);
    if cfg.per_trial {
        b.put("per_trial", &rounds);
    }
    Ok(())
}

fn complexity(cfg: &ScenarioConfig, b: &mut Builder) -> Outcome<()> {
    let voters = match (&cfg.voters, cfg.n) {
        (Some(v), _) => v.clone(),
        (None, Some(n)) => vec![n],
        (None, None) => vec![2, 10, 100],
    };
    let rows = voters
        .iter()
        .enumerate()
        .map(|(i, &v)| pad_complexity(v).map_err(|e| ScenarioError::config(&format!("voters[{i}]"), e.to_string())))
        .collect::<Outcome<Vec<_>>>()?;
    b.check(
        "pad_formula",
        rows.iter().all(|r| r.classical_pads == r.voters * (r.voters - 1) / 2),
    );
    b.put("table", rows);
    Ok(())
}

/// Dimension of the ballot layout a config would build, if it builds one.
pub fn ballot_dimension(cfg: &ScenarioConfig) -> Option<u128> {
    let n = cfg.n? as u128;
    let sites = match cfg.scenario? {
        ScenarioKind::Survey | ScenarioKind::ColludeDetect => 1,
        ScenarioKind::Multiparty => cfg.k.unwrap_or(1),
        ScenarioKind::MultipartyCollude => cfg.k.unwrap_or(2),
        ScenarioKind::BinaryBallot | ScenarioKind::AgentSpin | ScenarioKind::CheatVoter => cfg.agents.unwrap_or(2),
        _ => return None,
    } as u128;
    let modes = (0..sites).fold(sites * n + 1, |acc, _| acc.saturating_mul(n + 1));
    Some(modes)
}
