//! Greedy proportional approval voting over a set of offices.
//!
//! Every voter starts with weight 1. In each round the engine scores every
//! candidate of every still-unfilled office by summing the current weights of
//! its approvers, fills the office of the best-scoring candidate, and lowers
//! the weight of each voter who approves the new winner to `1 / (1 + s)`,
//! where `s` counts the winners that voter approves so far. After K rounds
//! every office has exactly one winner.
//!
//! Ties are broken towards the office listed first in the election, then
//! towards the candidate listed first on that office's slate.

use serde::Serialize;
use thiserror::Error;

use crate::exec::Execution;
use crate::model::{ApprovalProfile, CandidateId, Committee, Election, ModelError, OfficeId, VoterId};
use crate::score::Score;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TallyError {
    #[error("office `{0}` is already filled")]
    OfficeAlreadyFilled(OfficeId),
    #[error("unknown office `{0}`")]
    UnknownOffice(String),
    #[error("candidate `{candidate}` does not run for office `{office}`")]
    UnknownCandidate { office: String, candidate: String },
    #[error("inconsistent input: {0}")]
    InconsistentInput(#[from] ModelError),
}

/// Per-voter satisfaction counts and the set of decided offices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TallyState {
    satisfaction: Vec<u32>,
    filled: Vec<bool>,
}

impl TallyState {
    /// Every voter unsatisfied, every office open.
    pub fn new(election: &Election, profile: &ApprovalProfile) -> TallyState {
        TallyState {
            satisfaction: vec![0; profile.voter_count()],
            filled: vec![false; election.office_count()],
        }
    }

    /// Number of elected candidates each voter approves, in profile order.
    pub fn satisfaction(&self) -> &[u32] {
        &self.satisfaction
    }

    /// Current weight `1 / (1 + s)` of voter `voter`.
    pub fn weight(&self, voter: usize) -> Score {
        Score::harmonic_weight(self.satisfaction[voter])
    }

    pub fn is_filled(&self, office: usize) -> bool {
        self.filled[office]
    }

    pub fn filled_count(&self) -> usize {
        self.filled.iter().filter(|&&f| f).count()
    }

    /// Fills the winner's office and credits every approving voter. Returns
    /// the voters whose satisfaction increased.
    pub fn elect(
        &mut self,
        election: &Election,
        profile: &ApprovalProfile,
        flat: usize,
    ) -> Result<Vec<usize>, TallyError> {
        let office = election.seat(flat).office;
        if self.filled[office] {
            return Err(TallyError::OfficeAlreadyFilled(
                election.offices()[office].id.clone(),
            ));
        }
        self.filled[office] = true;
        let mut credited = Vec::new();
        for v in 0..profile.voter_count() {
            if profile.approves(v, flat) {
                self.satisfaction[v] += 1;
                credited.push(v);
            }
        }
        Ok(credited)
    }
}

/// Sum of `1 / (1 + s_v)` over `approvers`.
///
/// Approvers are grouped by satisfaction level first, so the exact sum needs
/// at most one rational addition per distinct level.
fn weighted_support(approvers: &[u32], satisfaction: &[u32]) -> Score {
    let mut per_level: Vec<u64> = Vec::new();
    for &v in approvers {
        let s = satisfaction[v as usize] as usize;
        if per_level.len() <= s {
            per_level.resize(s + 1, 0);
        }
        per_level[s] += 1;
    }
    per_level
        .iter()
        .enumerate()
        .filter(|(_, &count)| count > 0)
        .map(|(s, &count)| Score::ratio(count, s as u64 + 1))
        .sum()
}

/// Weighted support of `candidate` for `office` given the current state.
pub fn marginal_score(
    election: &Election,
    profile: &ApprovalProfile,
    state: &TallyState,
    office: &str,
    candidate: &str,
) -> Result<Score, TallyError> {
    profile.ensure_matches(election)?;
    let office_pos = election
        .office_position(office)
        .ok_or_else(|| TallyError::UnknownOffice(office.to_owned()))?;
    let seat = election
        .seat_of(candidate)
        .filter(|s| s.office == office_pos)
        .ok_or_else(|| TallyError::UnknownCandidate {
            office: office.to_owned(),
            candidate: candidate.to_owned(),
        })?;
    if state.is_filled(office_pos) {
        return Err(TallyError::OfficeAlreadyFilled(
            election.offices()[office_pos].id.clone(),
        ));
    }
    let approvers: Vec<u32> = (0..profile.voter_count())
        .filter(|&v| profile.approves(v, seat.flat))
        .map(|v| v as u32)
        .collect();
    Ok(weighted_support(&approvers, state.satisfaction()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CandidateScore {
    pub office: OfficeId,
    pub candidate: CandidateId,
    /// Flat candidate index in the election.
    #[serde(skip)]
    pub flat: usize,
    pub score: Score,
}

/// One greedy round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    /// Every candidate of every office still open at the start of the round,
    /// in election order.
    pub scores: Vec<CandidateScore>,
    pub winner_office: OfficeId,
    pub winner_candidate: CandidateId,
    pub winner_score: Score,
    /// Other (office, candidate) pairs that reached the winning score.
    pub tied_with: Vec<(OfficeId, CandidateId)>,
    /// Voters whose satisfaction increased, in profile order.
    pub satisfied_voters: Vec<VoterId>,
    /// The office was filled although no voter approves any of its remaining
    /// candidates (winning score 0).
    pub unsupported: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct AuditTrail {
    pub rounds: Vec<RoundRecord>,
}

pub fn greedy_pav(
    election: &Election,
    profile: &ApprovalProfile,
) -> Result<(Committee, AuditTrail), TallyError> {
    greedy_pav_with(election, profile, Execution::default())
}

/// [`greedy_pav`] with an explicit execution mode. The output does not depend
/// on the mode.
pub fn greedy_pav_with(
    election: &Election,
    profile: &ApprovalProfile,
    exec: Execution,
) -> Result<(Committee, AuditTrail), TallyError> {
    profile.ensure_matches(election)?;
    let approvers = profile.approvers_by_candidate(election);
    let mut state = TallyState::new(election, profile);
    let mut winners = vec![usize::MAX; election.office_count()];
    let mut trail = AuditTrail::default();

    for round in 1..=election.office_count() {
        let open: Vec<usize> = (0..election.office_count())
            .filter(|&o| !state.is_filled(o))
            .flat_map(|o| election.slate(o))
            .collect();
        let satisfaction = state.satisfaction();
        let scores = exec.map(&open, |&flat| weighted_support(&approvers[flat], satisfaction));

        // First maximum in election order wins.
        let mut best = 0;
        for (i, score) in scores.iter().enumerate().skip(1) {
            if *score > scores[best] {
                best = i;
            }
        }
        let winner = open[best];
        let winner_score = scores[best].clone();
        let tied_with = open
            .iter()
            .zip(&scores)
            .filter(|&(&flat, s)| flat != winner && *s == winner_score)
            .map(|(&flat, _)| id_pair(election, flat))
            .collect();

        let credited = state.elect(election, profile, winner)?;
        winners[election.seat(winner).office] = winner;

        let (winner_office, winner_candidate) = id_pair(election, winner);
        trail.rounds.push(RoundRecord {
            round,
            scores: open
                .iter()
                .zip(scores)
                .map(|(&flat, score)| {
                    let (office, candidate) = id_pair(election, flat);
                    CandidateScore {
                        office,
                        candidate,
                        flat,
                        score,
                    }
                })
                .collect(),
            winner_office,
            winner_candidate,
            unsupported: winner_score.is_zero(),
            winner_score,
            tied_with,
            satisfied_voters: credited
                .into_iter()
                .map(|v| profile.voter_id(v).clone())
                .collect(),
        });
    }

    Ok((Committee::from_flat(election, winners), trail))
}

fn id_pair(election: &Election, flat: usize) -> (OfficeId, CandidateId) {
    let seat = election.seat(flat);
    (
        election.offices()[seat.office].id.clone(),
        election.candidate(flat).id.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{ballot, election};
    use crate::model::validate_profile;

    fn four_voter() -> (Election, ApprovalProfile) {
        let e = election(&[("o1", &["A1", "B1"]), ("o2", &["A2", "B2"])]);
        let p = validate_profile(
            &e,
            &[
                ballot("v1", &[("o1", &["A1"]), ("o2", &["A2"])]),
                ballot("v2", &[("o1", &["A1"]), ("o2", &["A2"])]),
                ballot("v3", &[("o1", &["B1"]), ("o2", &["B2"])]),
                ballot("v4", &[("o1", &["B1"]), ("o2", &["B2"])]),
            ],
        )
        .unwrap();
        (e, p)
    }

    #[test]
    fn marginal_score_fresh_and_reduced() {
        let e = election(&[("o1", &["a", "b"]), ("o2", &["c"])]);
        let p = validate_profile(
            &e,
            &[
                ballot("v1", &[("o1", &["a"]), ("o2", &["c"])]),
                ballot("v2", &[("o1", &["a"]), ("o2", &["c"])]),
                ballot("v3", &[("o1", &["a"]), ("o2", &["c"])]),
            ],
        )
        .unwrap();
        let mut state = TallyState::new(&e, &p);
        assert_eq!(marginal_score(&e, &p, &state, "o1", "a").unwrap(), Score::from(3));
        assert_eq!(marginal_score(&e, &p, &state, "o1", "b").unwrap(), Score::zero());
        state.elect(&e, &p, 0).unwrap();
        assert_eq!(state.satisfaction(), &[1, 1, 1]);
        assert_eq!(
            marginal_score(&e, &p, &state, "o2", "c").unwrap(),
            Score::ratio(3, 2)
        );
        assert_eq!(
            marginal_score(&e, &p, &state, "o1", "b").unwrap_err(),
            TallyError::OfficeAlreadyFilled(OfficeId::new("o1"))
        );
        assert!(matches!(
            marginal_score(&e, &p, &state, "o2", "a"),
            Err(TallyError::UnknownCandidate { .. })
        ));
    }

    #[test]
    fn single_office() {
        let e = election(&[("o1", &["a", "b"])]);
        let p = validate_profile(
            &e,
            &[ballot("v1", &[("o1", &["a"])]), ballot("v2", &[("o1", &["a"])])],
        )
        .unwrap();
        let (committee, trail) = greedy_pav(&e, &p).unwrap();
        assert_eq!(committee.winner_of("o1").unwrap().as_str(), "a");
        assert_eq!(trail.rounds.len(), 1);
        assert_eq!(trail.rounds[0].scores[0].score, Score::from(2));
        assert_eq!(trail.rounds[0].scores[1].score, Score::zero());
    }

    #[test]
    fn four_voter_trace() {
        let (e, p) = four_voter();
        let (committee, trail) = greedy_pav(&e, &p).unwrap();
        assert_eq!(committee.to_string(), "{o1: A1, o2: B2}");

        let r1 = &trail.rounds[0];
        assert!(r1.scores.iter().all(|s| s.score == Score::from(2)));
        assert_eq!(r1.winner_candidate.as_str(), "A1");
        assert_eq!(r1.tied_with.len(), 3);
        assert_eq!(r1.satisfied_voters, vec![VoterId::new("v1"), VoterId::new("v2")]);

        let r2 = &trail.rounds[1];
        let scores: Vec<(String, Score)> = r2
            .scores
            .iter()
            .map(|s| (s.candidate.to_string(), s.score.clone()))
            .collect();
        assert_eq!(
            scores,
            vec![("A2".into(), Score::from(1)), ("B2".into(), Score::from(2))]
        );
        assert_eq!(r2.winner_candidate.as_str(), "B2");
        assert!(r2.tied_with.is_empty());
    }

    #[test]
    fn zero_support_office_still_filled() {
        let e = election(&[("o1", &["a", "b"]), ("o2", &["c", "d"])]);
        let p = validate_profile(&e, &[ballot("v1", &[("o1", &["b"])])]).unwrap();
        let (committee, trail) = greedy_pav(&e, &p).unwrap();
        assert_eq!(committee.to_string(), "{o1: b, o2: c}");
        assert!(!trail.rounds[0].unsupported);
        assert!(trail.rounds[1].unsupported);
        assert_eq!(trail.rounds[1].tied_with.len(), 1);
    }

    #[test]
    fn execution_modes_identical() {
        let (e, p) = four_voter();
        assert_eq!(
            greedy_pav_with(&e, &p, Execution::Sequential).unwrap(),
            greedy_pav_with(&e, &p, Execution::Parallel).unwrap()
        );
    }

    #[test]
    fn rejects_foreign_profile() {
        let (_, p) = four_voter();
        let other = election(&[("o1", &["x"])]);
        assert!(matches!(
            greedy_pav(&other, &p),
            Err(TallyError::InconsistentInput(ModelError::ElectionMismatch))
        ));
    }
}
