//! Synthetic electorates built from voter blocs, and experiments comparing
//! greedy PAV with the per-office plurality baseline.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::io::FormatError;
use crate::model::{
    check_identifier, validate_ballot, validate_profile, ApprovalProfile, BallotDraft, Committee, Election,
};
use crate::oracle::{
    check_gjr, exact_pav, pav_score, plurality_baseline, OracleError, DEFAULT_SEARCH_BUDGET,
};
use crate::score::Score;
use crate::tally::greedy_pav;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("bloc spec is inconsistent: {0}")]
    SpecInconsistent(String),
    #[error("profile, committee and spec do not describe the same electorate")]
    InconsistentInput,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// A group of voters with identical approvals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bloc {
    pub label: String,
    pub voter_count: usize,
    /// Office id → approved candidate ids.
    #[serde(default)]
    pub approved: BTreeMap<String, Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlocSpec {
    /// Label used in reports; defaults to the spec's index.
    #[serde(default)]
    pub name: Option<String>,
    pub blocs: Vec<Bloc>,
    #[serde(default)]
    pub seed: u64,
    /// Probability, per voter and office, that the voter ignores the bloc
    /// line and approves one uniformly drawn candidate of that office
    /// instead. Zero gives exact bloc ballots.
    #[serde(default)]
    pub defection_rate: f64,
}

impl BlocSpec {
    pub fn voter_count(&self) -> usize {
        self.blocs.iter().map(|b| b.voter_count).sum()
    }
}

/// Parses a JSON array of bloc specs.
pub fn parse_specs(bytes: &[u8]) -> Result<Vec<BlocSpec>, FormatError> {
    Ok(serde_json::from_slice(bytes)?)
}

fn check_spec(election: &Election, spec: &BlocSpec) -> Result<(), SimError> {
    if !(0.0..=1.0).contains(&spec.defection_rate) {
        return Err(SimError::SpecInconsistent(format!(
            "defection_rate {} is outside [0, 1]",
            spec.defection_rate
        )));
    }
    if spec.voter_count() == 0 {
        return Err(SimError::SpecInconsistent("spec has no voters".into()));
    }
    let mut labels = HashSet::new();
    for bloc in &spec.blocs {
        check_identifier(&bloc.label, || "label".into())
            .map_err(|e| SimError::SpecInconsistent(e.to_string()))?;
        if !labels.insert(bloc.label.as_str()) {
            return Err(SimError::SpecInconsistent(format!(
                "duplicate bloc label `{}`",
                bloc.label
            )));
        }
        let template = BallotDraft {
            voter_id: bloc.label.clone(),
            approvals: bloc.approved.clone(),
        };
        validate_ballot(election, &template, &format!("blocs.{}", bloc.label))
            .map_err(|e| SimError::SpecInconsistent(e.to_string()))?;
    }
    Ok(())
}

/// Expands a spec into ballots. Voter ids are `<label>-<k>` with `k`
/// counting from 1. Deterministic in `(spec, seed)`.
pub fn generate_profile(election: &Election, spec: &BlocSpec) -> Result<ApprovalProfile, SimError> {
    check_spec(election, spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut drafts = Vec::with_capacity(spec.voter_count());
    for bloc in &spec.blocs {
        for k in 1..=bloc.voter_count {
            let mut approvals = bloc.approved.clone();
            if spec.defection_rate > 0.0 {
                for office in election.offices() {
                    if rng.random_bool(spec.defection_rate) {
                        let pick = rng.random_range(0..office.candidates.len());
                        approvals.insert(
                            office.id.to_string(),
                            vec![office.candidates[pick].id.to_string()],
                        );
                    }
                }
            }
            drafts.push(BallotDraft {
                voter_id: format!("{}-{k}", bloc.label),
                approvals,
            });
        }
    }
    validate_profile(election, &drafts).map_err(|e| SimError::SpecInconsistent(e.to_string()))
}

/// For each bloc, the fraction of offices whose winner the bloc approves.
pub fn representation_share(
    election: &Election,
    profile: &ApprovalProfile,
    committee: &Committee,
    spec: &BlocSpec,
) -> Result<BTreeMap<String, Score>, SimError> {
    if profile.ensure_matches(election).is_err()
        || committee.ensure_matches(election).is_err()
        || profile.voter_count() != spec.voter_count()
    {
        return Err(SimError::InconsistentInput);
    }
    let k = election.office_count() as u64;
    spec.blocs
        .iter()
        .map(|bloc| {
            let mut hits = 0u64;
            for (office, winner) in committee.iter() {
                if bloc
                    .approved
                    .get(office.as_str())
                    .is_some_and(|cs| cs.iter().any(|c| c == winner.as_str()))
                {
                    hits += 1;
                }
            }
            Ok((bloc.label.clone(), Score::ratio(hits, k)))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Rule {
    #[serde(rename = "greedy_pav")]
    GreedyPav,
    #[serde(rename = "plurality")]
    Plurality,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::GreedyPav => "greedy_pav",
            Rule::Plurality => "plurality",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportRow {
    pub spec: String,
    pub rule: Rule,
    pub bloc: String,
    pub share: Score,
    pub gjr_violations: usize,
    /// PAV score of the rule's committee over the optimum, when the exact
    /// search fits the budget and the optimum is positive.
    pub approximation_ratio: Option<Score>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

pub const REPORT_HEADER: [&str; 6] = ["spec", "rule", "bloc", "share_num", "share_den", "gjr_violations"];

impl Report {
    pub fn to_csv(&self) -> Vec<u8> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(REPORT_HEADER).expect("in-memory write");
        for row in &self.rows {
            writer
                .write_record([
                    row.spec.clone(),
                    row.rule.name().to_owned(),
                    row.bloc.clone(),
                    row.share.numerator().to_string(),
                    row.share.denominator().to_string(),
                    row.gjr_violations.to_string(),
                ])
                .expect("in-memory write");
        }
        writer.into_inner().expect("in-memory flush")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let ratio = row
                .approximation_ratio
                .as_ref()
                .map_or_else(|| "skipped".to_owned(), ToString::to_string);
            let _ = writeln!(
                out,
                "{:<12} {:<10} {:<12} share {:>7} ({:.3})  gjr violations {:>3}  ratio {}",
                row.spec,
                row.rule.name(),
                row.bloc,
                row.share.to_string(),
                row.share.to_f64(),
                row.gjr_violations,
                ratio
            );
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExperimentOptions {
    pub search_budget: u64,
    pub execution: Execution,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            search_budget: DEFAULT_SEARCH_BUDGET,
            execution: Execution::default(),
        }
    }
}

pub fn run_experiment(election: &Election, specs: &[BlocSpec]) -> Result<Report, SimError> {
    run_experiment_with(election, specs, ExperimentOptions::default())
}

/// Runs both rules on every spec. Specs are evaluated independently (in
/// parallel when enabled); rows are ordered by spec index, then rule name,
/// then bloc order.
pub fn run_experiment_with(
    election: &Election,
    specs: &[BlocSpec],
    options: ExperimentOptions,
) -> Result<Report, SimError> {
    let indexed: Vec<(usize, &BlocSpec)> = specs.iter().enumerate().collect();
    let per_spec = options.execution.map(&indexed, |&(i, spec)| {
        spec_rows(election, i, spec, options.search_budget)
    });
    let mut report = Report::default();
    for rows in per_spec {
        report.rows.extend(rows?);
    }
    Ok(report)
}

fn spec_rows(
    election: &Election,
    index: usize,
    spec: &BlocSpec,
    budget: u64,
) -> Result<Vec<ReportRow>, SimError> {
    let name = spec.name.clone().unwrap_or_else(|| index.to_string());
    let profile = generate_profile(election, spec)?;
    let optimum = match exact_pav(election, &profile, budget) {
        Ok(exact) if !exact.optimal_score.is_zero() => Some(exact.optimal_score),
        Ok(_) | Err(OracleError::SearchBudgetExceeded { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let (greedy, _) = greedy_pav(election, &profile).map_err(OracleError::from)?;
    let plurality = plurality_baseline(election, &profile)?;

    let mut rows = Vec::new();
    for (rule, committee) in [(Rule::GreedyPav, greedy), (Rule::Plurality, plurality)] {
        let shares = representation_share(election, &profile, &committee, spec)?;
        let violations = check_gjr(election, &profile, &committee)?.len();
        let ratio = match &optimum {
            Some(opt) => Some(pav_score(election, &profile, &committee)? / opt.clone()),
            None => None,
        };
        for bloc in &spec.blocs {
            rows.push(ReportRow {
                spec: name.clone(),
                rule,
                bloc: bloc.label.clone(),
                share: shares[&bloc.label].clone(),
                gjr_violations: violations,
                approximation_ratio: ratio.clone(),
            });
        }
    }
    Ok(rows)
}

/// Two disjoint blocs over an election whose offices each list the majority
/// candidate first and the minority candidate second.
pub fn two_bloc_spec(election: &Election, majority: usize, minority: usize) -> BlocSpec {
    let line = |position: usize| {
        election
            .offices()
            .iter()
            .map(|o| (o.id.to_string(), vec![o.candidates[position].id.to_string()]))
            .collect()
    };
    BlocSpec {
        name: Some(format!("{majority}-{minority}")),
        blocs: vec![
            Bloc {
                label: "majority".into(),
                voter_count: majority,
                approved: line(0),
            },
            Bloc {
                label: "minority".into(),
                voter_count: minority,
                approved: line(1),
            },
        ],
        seed: 0,
        defection_rate: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::election;

    fn bloc_election(k: usize) -> Election {
        let ids: Vec<(String, [String; 2])> = (1..=k)
            .map(|o| (format!("o{o}"), [format!("M{o}"), format!("m{o}")]))
            .collect();
        let refs: Vec<[&str; 2]> = ids.iter().map(|(_, c)| [c[0].as_str(), c[1].as_str()]).collect();
        let spec: Vec<(&str, &[&str])> = ids
            .iter()
            .zip(&refs)
            .map(|((o, _), c)| (o.as_str(), c.as_slice()))
            .collect();
        election(&spec)
    }

    #[test]
    fn seventy_five_twenty_five() {
        let e = bloc_election(4);
        let spec = two_bloc_spec(&e, 75, 25);
        let p = generate_profile(&e, &spec).unwrap();
        assert_eq!(p.voter_count(), 100);
        assert_eq!(p.voter_id(0).as_str(), "majority-1");
        assert_eq!(p.voter_id(99).as_str(), "minority-25");

        let plurality = plurality_baseline(&e, &p).unwrap();
        let shares = representation_share(&e, &p, &plurality, &spec).unwrap();
        assert_eq!(shares["majority"], Score::one());
        assert_eq!(shares["minority"], Score::zero());

        let (greedy, trail) = greedy_pav(&e, &p).unwrap();
        let shares = representation_share(&e, &p, &greedy, &spec).unwrap();
        assert_eq!(shares["majority"], Score::ratio(3, 4));
        assert_eq!(shares["minority"], Score::ratio(1, 4));
        // 75, 75/2, then 75/3 = 25 ties with the minority's 25.
        let winning: Vec<Score> = trail.rounds.iter().map(|r| r.winner_score.clone()).collect();
        assert_eq!(
            winning,
            vec![
                Score::from(75),
                Score::ratio(75, 2),
                Score::from(25),
                Score::from(25)
            ]
        );
        assert_eq!(trail.rounds[2].tied_with.len(), 3);
        assert_eq!(greedy.to_string(), "{o1: M1, o2: M2, o3: M3, o4: m4}");
    }

    #[test]
    fn single_voter_bloc() {
        let e = bloc_election(2);
        let spec = BlocSpec {
            name: None,
            blocs: vec![Bloc {
                label: "solo".into(),
                voter_count: 1,
                approved: [("o2".to_string(), vec!["m2".to_string()])].into(),
            }],
            seed: 9,
            defection_rate: 0.0,
        };
        let p = generate_profile(&e, &spec).unwrap();
        assert_eq!(p.voter_count(), 1);
        assert_eq!(p.to_drafts()[0].approvals, spec.blocs[0].approved);
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let e = bloc_election(5);
        let mut spec = two_bloc_spec(&e, 30, 20);
        spec.defection_rate = 0.3;
        spec.seed = 42;
        let a = generate_profile(&e, &spec).unwrap();
        let b = generate_profile(&e, &spec).unwrap();
        assert_eq!(a, b);
        spec.seed = 43;
        assert_ne!(a, generate_profile(&e, &spec).unwrap());
    }

    #[test]
    fn inconsistent_specs() {
        let e = bloc_election(2);
        let mut spec = two_bloc_spec(&e, 1, 1);
        spec.blocs[1].label = "majority".into();
        assert!(matches!(
            generate_profile(&e, &spec),
            Err(SimError::SpecInconsistent(_))
        ));

        let mut spec = two_bloc_spec(&e, 1, 1);
        spec.blocs[0].approved.insert("o1".into(), vec!["M2".into()]);
        assert!(matches!(
            generate_profile(&e, &spec),
            Err(SimError::SpecInconsistent(_))
        ));

        let spec = two_bloc_spec(&e, 0, 0);
        assert!(matches!(
            generate_profile(&e, &spec),
            Err(SimError::SpecInconsistent(_))
        ));

        let spec = two_bloc_spec(&e, 3, 1);
        let p = generate_profile(&e, &spec).unwrap();
        let (c, _) = greedy_pav(&e, &p).unwrap();
        let other = two_bloc_spec(&e, 3, 2);
        assert_eq!(
            representation_share(&e, &p, &c, &other).unwrap_err(),
            SimError::InconsistentInput
        );
    }

    #[test]
    fn unanimous_share_is_one() {
        let e = bloc_election(3);
        let mut spec = two_bloc_spec(&e, 10, 0);
        spec.blocs.truncate(1);
        let p = generate_profile(&e, &spec).unwrap();
        let (c, _) = greedy_pav(&e, &p).unwrap();
        assert_eq!(
            representation_share(&e, &p, &c, &spec).unwrap()["majority"],
            Score::one()
        );
    }

    #[test]
    fn experiment_rows() {
        let e = bloc_election(4);
        assert!(run_experiment(&e, &[]).unwrap().rows.is_empty());

        let report = run_experiment(&e, &[two_bloc_spec(&e, 75, 25)]).unwrap();
        let summary: Vec<(&str, &str, String, usize)> = report
            .rows
            .iter()
            .map(|r| {
                (
                    r.rule.name(),
                    r.bloc.as_str(),
                    r.share.to_string(),
                    r.gjr_violations,
                )
            })
            .collect();
        assert_eq!(
            summary,
            vec![
                ("greedy_pav", "majority", "3/4".into(), 0),
                ("greedy_pav", "minority", "1/4".into(), 0),
                ("plurality", "majority", "1".into(), 4),
                ("plurality", "minority", "0".into(), 4),
            ]
        );
        let csv = String::from_utf8(report.to_csv()).unwrap();
        assert!(csv.starts_with("spec,rule,bloc,share_num,share_den,gjr_violations\n"));
        assert!(csv.contains("75-25,greedy_pav,minority,1,4,0\n"));
    }

    #[test]
    fn minority_share_non_decreasing_in_fraction() {
        let e = bloc_election(10);
        let specs: Vec<BlocSpec> = [(90, 10), (75, 25), (60, 40)]
            .iter()
            .map(|&(maj, min)| two_bloc_spec(&e, maj, min))
            .collect();
        let report = run_experiment(&e, &specs).unwrap();
        let minority: Vec<Score> = report
            .rows
            .iter()
            .filter(|r| r.rule == Rule::GreedyPav && r.bloc == "minority")
            .map(|r| r.share.clone())
            .collect();
        assert_eq!(minority.len(), 3);
        assert!(minority.windows(2).all(|w| w[0] <= w[1]), "{minority:?}");
        assert!(minority[0] >= Score::ratio(1, 10));
    }
}
