use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cabinet_core::io::{parse_ballots, parse_committee, parse_election, tally_results, FormatError};
use cabinet_core::oracle::{OracleError, DEFAULT_SEARCH_BUDGET};
use cabinet_core::sim::{parse_specs, run_experiment_with, ExperimentOptions, SimError};
use cabinet_core::{
    check_gjr, exact_pav, greedy_pav, pav_score, ApprovalProfile, Committee, Election, GjrViolation, Score,
};
use cabinet_service::Config;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "cabinet",
    version,
    about = "Proportional election of a cabinet, one winner per office"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Elect one candidate per office and write the results.
    Tally {
        #[arg(long)]
        election: PathBuf,
        #[arg(long)]
        ballots: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Check a committee for GJR and compare it with the exact PAV optimum.
    Verify {
        #[arg(long)]
        election: PathBuf,
        #[arg(long)]
        ballots: PathBuf,
        /// Most committees the exact search may enumerate.
        #[arg(long, default_value_t = DEFAULT_SEARCH_BUDGET)]
        budget: u64,
        /// Check this committee instead of the greedy one.
        #[arg(long)]
        committee: Option<PathBuf>,
    },
    /// Run bloc electorates through greedy PAV and plurality.
    Simulate {
        #[arg(long)]
        election: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Start the HTTP service.
    Serve {
        /// Overrides BIND_ADDR.
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

/// Why a command stopped. Each maps to one exit code.
enum Failure {
    Io(String),
    Invalid(String),
    Gjr,
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Gjr => 3,
        }
    }
}

fn invalid(file: &Path, err: FormatError) -> Failure {
    Failure::Invalid(format!("{}: {err}", file.display()))
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn load(election_path: &Path, ballots_path: &Path) -> Result<(Election, ApprovalProfile), Failure> {
    let election = parse_election(&read(election_path)?).map_err(|e| invalid(election_path, e))?;
    let profile = parse_ballots(&read(ballots_path)?, &election).map_err(|e| invalid(ballots_path, e))?;
    Ok((election, profile))
}

fn oracle_failure(err: OracleError) -> Failure {
    Failure::Invalid(err.to_string())
}

fn tally(election_path: &Path, ballots_path: &Path, out: &Path, format: Format) -> Result<(), Failure> {
    let (election, profile) = load(election_path, ballots_path)?;
    let bytes = match format {
        Format::Json => tally_results(&election, &profile).map_err(oracle_failure)?,
        Format::Text => explain(&election, &profile)?.into_bytes(),
    };
    write(out, &bytes)?;
    log::info!("wrote {}", out.display());
    Ok(())
}

fn explain(election: &Election, profile: &ApprovalProfile) -> Result<String, Failure> {
    let (committee, trail) = greedy_pav(election, profile).map_err(|e| oracle_failure(e.into()))?;
    let violations = check_gjr(election, profile, &committee).map_err(oracle_failure)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}: {} offices, {} voters",
        election.name(),
        election.office_count(),
        profile.voter_count()
    );
    for round in &trail.rounds {
        let _ = writeln!(out, "\nround {}", round.round);
        for s in &round.scores {
            let mark = if s.office == round.winner_office && s.candidate == round.winner_candidate {
                " *"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "  {:<16} {:<16} {:>10}{mark}",
                s.office,
                s.candidate,
                s.score.to_string()
            );
        }
        let _ = writeln!(
            out,
            "  elected {} for {} with {}",
            round.winner_candidate, round.winner_office, round.winner_score
        );
        if !round.tied_with.is_empty() {
            let tied: Vec<String> = round
                .tied_with
                .iter()
                .map(|(o, c)| format!("{c} ({o})"))
                .collect();
            let _ = writeln!(out, "  tie broken by election order against {}", tied.join(", "));
        }
        if round.unsupported {
            let _ = writeln!(
                out,
                "  no voter supports a remaining candidate of {}",
                round.winner_office
            );
        }
        let _ = writeln!(out, "  {} voters now weigh less", round.satisfied_voters.len());
    }
    let _ = writeln!(out, "\ncommittee: {committee}");
    render_gjr(&mut out, &violations);
    Ok(out)
}

fn render_gjr(out: &mut String, violations: &[GjrViolation]) {
    if violations.is_empty() {
        let _ = writeln!(out, "GJR: ok");
        return;
    }
    let _ = writeln!(out, "GJR: {} violations", violations.len());
    for v in violations {
        let _ = writeln!(
            out,
            "  {} ({}) is approved by {} voters who approve no winner (threshold {}): {}",
            v.candidate,
            v.office,
            v.group_size,
            v.threshold,
            v.deserted_group
                .iter()
                .map(|id| id.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        );
    }
}

fn verify(
    election_path: &Path,
    ballots_path: &Path,
    budget: u64,
    committee_path: Option<&Path>,
) -> Result<(), Failure> {
    let (election, profile) = load(election_path, ballots_path)?;
    let committee = match committee_path {
        Some(path) => parse_committee(&read(path)?, &election).map_err(|e| invalid(path, e))?,
        None => {
            greedy_pav(&election, &profile)
                .map_err(|e| oracle_failure(e.into()))?
                .0
        }
    };
    let violations = check_gjr(&election, &profile, &committee).map_err(oracle_failure)?;
    let ratio = match approximation_ratio_of(&election, &profile, &committee, budget) {
        Ok(r) => r.to_string(),
        Err(OracleError::SearchBudgetExceeded { .. } | OracleError::DegenerateInstance) => {
            "skipped".to_owned()
        }
        Err(e) => return Err(oracle_failure(e)),
    };

    let mut out = format!("committee: {committee}\n");
    render_gjr(&mut out, &violations);
    let _ = writeln!(out, "ratio: {ratio}");
    print!("{out}");
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Gjr)
    }
}

/// PAV score of `committee` over the exact optimum.
fn approximation_ratio_of(
    election: &Election,
    profile: &ApprovalProfile,
    committee: &Committee,
    budget: u64,
) -> Result<Score, OracleError> {
    let exact = exact_pav(election, profile, budget)?;
    if exact.optimal_score.is_zero() {
        return Err(OracleError::DegenerateInstance);
    }
    Ok(pav_score(election, profile, committee)? / exact.optimal_score)
}

fn simulate(election_path: &Path, spec_path: &Path, out: &Path) -> Result<(), Failure> {
    let election = parse_election(&read(election_path)?).map_err(|e| invalid(election_path, e))?;
    let specs = parse_specs(&read(spec_path)?).map_err(|e| invalid(spec_path, e))?;
    let report =
        run_experiment_with(&election, &specs, ExperimentOptions::default()).map_err(|e| match e {
            SimError::SpecInconsistent(m) => Failure::Invalid(format!("{}: {m}", spec_path.display())),
            other => Failure::Invalid(other.to_string()),
        })?;
    write(out, &report.to_csv())?;
    for line in report.to_text().lines() {
        log::info!("{line}");
    }
    log::info!("wrote {} rows to {}", report.rows.len(), out.display());
    Ok(())
}

fn serve(bind: Option<String>) -> Result<(), Failure> {
    let mut config = Config::from_env().map_err(|e| Failure::Invalid(e.to_string()))?;
    if let Some(addr) = bind {
        config.bind_addr = addr;
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Io(e.to_string()))?;
    runtime.block_on(async {
        let listener = cabinet_service::bind(&config)
            .await
            .map_err(|e| Failure::Io(format!("cannot bind {}: {e}", config.bind_addr)))?;
        cabinet_service::serve(listener, config)
            .await
            .map_err(|e| Failure::Io(e.to_string()))
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tally {
            election,
            ballots,
            out,
            format,
        } => tally(&election, &ballots, &out, format),
        Command::Verify {
            election,
            ballots,
            budget,
            committee,
        } => verify(&election, &ballots, budget, committee.as_deref()),
        Command::Simulate { election, spec, out } => simulate(&election, &spec, &out),
        Command::Serve { bind } => serve(bind),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Io(m) | Failure::Invalid(m) => eprintln!("error: {m}"),
                Failure::Gjr => {}
            }
            ExitCode::from(failure.exit_code())
        }
    }
}
