use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qballot::attacks::AttackKind;
use qballot::scenario::{run_scenario, BallotEntry, ScenarioConfig, ScenarioError, ScenarioKind};

const EXIT_CONFIG: u8 = 2;
const EXIT_DIMENSION: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

/// Simulate entangled-ballot voting protocols, attacks on them and the
/// dining-cryptographers baseline. Prints a JSON report.
#[derive(Debug, Parser)]
#[command(name = "qballot", version)]
struct Cli {
    /// JSON scenario file; subcommand flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for Monte Carlo trials.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of Monte Carlo trials.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Also write the report to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fail when a state has weight outside the tally basis.
    #[arg(long, global = true)]
    strict_basis: bool,
    /// Report tallies above N/2 as negative values.
    #[arg(long, global = true)]
    signed_tally: bool,
    /// Include per-trial records and vote values in the report.
    #[arg(long, global = true)]
    per_trial: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args, Default)]
struct BallotArgs {
    /// Particle number.
    #[arg(short = 'N', long = "n")]
    n: Option<usize>,
    /// Number of voting sites.
    #[arg(short = 'K', long = "k")]
    k: Option<usize>,
    /// Number of ballot agents (2 or 3).
    #[arg(long)]
    agents: Option<usize>,
    /// Comma-separated votes: integers, or yes/no/cheat.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    votes: Option<Vec<BallotEntry>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Two voters on a shared single particle; reveals only whether they agree.
    Comparative {
        #[arg(value_parser = ["yes", "no"])]
        first: String,
        #[arg(value_parser = ["yes", "no"])]
        second: String,
    },
    /// Two-mode anonymous survey.
    Survey(BallotArgs),
    /// Survey with one voting site per voter.
    Multiparty(BallotArgs),
    /// Yes/no ballot cast through qutrit-holding ballot agents.
    BinaryBallot(BallotArgs),
    /// Run an attack together with the check meant to catch it.
    Attack {
        /// collude, agent-spin, cheat-voter or multiparty-collude.
        #[arg(long)]
        kind: AttackKind,
        #[command(flatten)]
        ballot: BallotArgs,
    },
    /// Dining-cryptographers rounds.
    Dcnet {
        #[arg(long)]
        diners: Option<usize>,
        /// Diner index who pays; omit for no payer.
        #[arg(long)]
        payer: Option<usize>,
    },
    /// One-time pads needed by the classical protocol per number of voters.
    Complexity {
        #[arg(long, value_delimiter = ',')]
        voters: Option<Vec<usize>>,
    },
}

fn apply_ballot(cfg: &mut ScenarioConfig, args: BallotArgs) {
    cfg.n = args.n.or(cfg.n);
    cfg.k = args.k.or(cfg.k);
    cfg.agents = args.agents.or(cfg.agents);
    if let Some(v) = args.votes {
        cfg.votes = Some(v);
        cfg.vote_distribution = None;
    }
}

fn build_config(cli: Cli) -> Result<ScenarioConfig, ScenarioError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| ScenarioError::Config {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            ScenarioConfig::from_json(&text)?
        }
        None => ScenarioConfig::default(),
    };
    match cli.command {
        None => {}
        Some(Command::Comparative { first, second }) => {
            cfg.scenario = Some(ScenarioKind::Comparative);
            let parse = |s: &str| s.parse::<BallotEntry>().expect("validated by clap");
            cfg.votes = Some(vec![parse(&first), parse(&second)]);
        }
        Some(Command::Survey(a)) => {
            cfg.scenario = Some(ScenarioKind::Survey);
            apply_ballot(&mut cfg, a);
        }
        Some(Command::Multiparty(a)) => {
            cfg.scenario = Some(ScenarioKind::Multiparty);
            apply_ballot(&mut cfg, a);
        }
        Some(Command::BinaryBallot(a)) => {
            cfg.scenario = Some(ScenarioKind::BinaryBallot);
            apply_ballot(&mut cfg, a);
        }
        Some(Command::Attack { kind, ballot }) => {
            cfg.scenario = Some(match kind {
                AttackKind::Collude => ScenarioKind::ColludeDetect,
                AttackKind::AgentSpin => ScenarioKind::AgentSpin,
                AttackKind::CheatVoter => ScenarioKind::CheatVoter,
                AttackKind::MultipartyCollude => ScenarioKind::MultipartyCollude,
            });
            apply_ballot(&mut cfg, ballot);
        }
        Some(Command::Dcnet { diners, payer }) => {
            cfg.scenario = Some(ScenarioKind::Dcnet);
            cfg.diners = diners.or(cfg.diners);
            cfg.payer = payer.or(cfg.payer);
        }
        Some(Command::Complexity { voters }) => {
            cfg.scenario = Some(ScenarioKind::Complexity);
            cfg.voters = voters.or(cfg.voters);
        }
    }
    cfg.seed = cli.seed.or(cfg.seed);
    cfg.trials = cli.trials.or(cfg.trials);
    cfg.out = cli.out.or(cfg.out);
    cfg.strict_basis |= cli.strict_basis;
    cfg.signed_tally |= cli.signed_tally;
    cfg.per_trial |= cli.per_trial;
    if cfg.scenario.is_none() {
        return Err(ScenarioError::Config {
            path: "scenario".into(),
            message: "give a subcommand or a --config file naming a scenario".into(),
        });
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build_config(cli).and_then(|cfg| run_scenario(&cfg).map(|r| (cfg, r)));
    let (cfg, report) = match result {
        Ok(ok) => ok,
        Err(e) => {
            eprintln!("qballot: {e}");
            return ExitCode::from(match e {
                ScenarioError::Config { .. } => EXIT_CONFIG,
                ScenarioError::Dimension { .. } => EXIT_DIMENSION,
                ScenarioError::Engine(_) => EXIT_INVARIANT,
            });
        }
    };
    let json = report.to_json_pretty();
    // A closed pipe (e.g. `| head`) is not an error for the run itself.
    let _ = writeln!(io::stdout(), "{json}");
    if let Some(path) = &cfg.out {
        if let Err(e) = fs::write(path, format!("{json}\n")) {
            eprintln!("qballot: cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let violations = report.violations();
    if !violations.is_empty() {
        eprintln!("qballot: invariant violation: {}", violations.join(", "));
        return ExitCode::from(EXIT_INVARIANT);
    }
    ExitCode::SUCCESS
}
