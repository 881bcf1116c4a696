//! Independent checks on committees: the exact PAV objective, brute-force
//! optimisation, the global justified representation (GJR) test, and a
//! per-office plurality baseline.
//!
//! Nothing in here reuses the greedy engine's scoring path. The PAV objective
//! is evaluated from harmonic totals `H(t)`, not from per-round weights.

use serde::Serialize;
use thiserror::Error;

use crate::exec::Execution;
use crate::model::{ApprovalProfile, CandidateId, Committee, Election, ModelError, OfficeId, VoterId};
use crate::score::Score;
use crate::tally::{greedy_pav_with, TallyError};

/// Default cap on the number of committees [`exact_pav`] will enumerate.
pub const DEFAULT_SEARCH_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("search space of {committees} committees exceeds the budget of {budget}")]
    SearchBudgetExceeded {
        /// Rendered count; "overflow" when it exceeds 128 bits.
        committees: String,
        budget: u64,
    },
    #[error("optimal PAV score is zero; approximation ratio undefined")]
    DegenerateInstance,
    #[error("inconsistent input: {0}")]
    InconsistentInput(#[from] ModelError),
    #[error("selection has two winners for office `{0}`")]
    OfficeSelectedTwice(OfficeId),
    #[error(transparent)]
    Tally(#[from] TallyError),
}

/// `H(0), H(1), ..., H(max)` with `H(t) = 1 + 1/2 + ... + 1/t`.
pub fn harmonic_table(max: usize) -> Vec<Score> {
    let mut table = Vec::with_capacity(max + 1);
    table.push(Score::zero());
    for t in 1..=max {
        let next = table[t - 1].clone() + Score::ratio(1, t as u64);
        table.push(next);
    }
    table
}

/// PAV objective of an arbitrary set of winners (flat candidate indices).
fn pav_of(profile: &ApprovalProfile, winners: &[usize], table: &[Score]) -> Score {
    let mut histogram = vec![0u64; table.len()];
    for v in 0..profile.voter_count() {
        let t = winners.iter().filter(|&&w| profile.approves(v, w)).count();
        histogram[t] += 1;
    }
    histogram
        .iter()
        .zip(table)
        .filter(|(&count, _)| count > 0)
        .map(|(&count, h)| Score::from(count) * h.clone())
        .sum()
}

/// `Σ_v H(t_v)` where `t_v` is the number of committee members voter `v`
/// approves.
pub fn pav_score(
    election: &Election,
    profile: &ApprovalProfile,
    committee: &Committee,
) -> Result<Score, OracleError> {
    profile.ensure_matches(election)?;
    committee.ensure_matches(election)?;
    let table = harmonic_table(election.office_count());
    Ok(pav_of(profile, committee.winners(), &table))
}

/// PAV objective of a partial selection: at most one winner per office, any
/// subset of offices.
pub fn pav_score_partial(
    election: &Election,
    profile: &ApprovalProfile,
    selection: &[usize],
) -> Result<Score, OracleError> {
    profile.ensure_matches(election)?;
    let mut seen = vec![false; election.office_count()];
    for &flat in selection {
        let office = election.seat(flat).office;
        if std::mem::replace(&mut seen[office], true) {
            return Err(OracleError::OfficeSelectedTwice(
                election.offices()[office].id.clone(),
            ));
        }
    }
    let table = harmonic_table(election.office_count());
    Ok(pav_of(profile, selection, &table))
}

/// The committee with the given rank in lexicographic (office-major,
/// slate-order) enumeration. `index` must be below the committee count.
pub fn committee_at(election: &Election, index: u128) -> Committee {
    let mut winners = vec![0; election.office_count()];
    decode_winners(election, index, &mut winners);
    Committee::from_flat(election, winners)
}

fn decode_winners(election: &Election, mut index: u128, winners: &mut [usize]) {
    for office in (0..election.office_count()).rev() {
        let slate = election.slate(office);
        let size = slate.len() as u128;
        winners[office] = slate.start + (index % size) as usize;
        index /= size;
    }
}

/// Every complete committee, in lexicographic order.
pub fn all_committees(election: &Election) -> impl Iterator<Item = Committee> + '_ {
    let total = election.committee_count().unwrap_or(0);
    (0..total).map(move |i| committee_at(election, i))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactPav {
    pub optimal_score: Score,
    /// All optimal committees, in lexicographic order.
    pub optima: Vec<Committee>,
    pub committees_examined: u64,
}

fn budget_check(election: &Election, budget: u64) -> Result<u64, OracleError> {
    match election.committee_count() {
        Some(total) if total <= u128::from(budget) => Ok(total as u64),
        total => Err(OracleError::SearchBudgetExceeded {
            committees: total.map_or_else(|| "overflow".to_owned(), |t| t.to_string()),
            budget,
        }),
    }
}

pub fn exact_pav(
    election: &Election,
    profile: &ApprovalProfile,
    budget: u64,
) -> Result<ExactPav, OracleError> {
    exact_pav_with(election, profile, budget, Execution::default())
}

/// Exhaustive search over every committee. Chunks of the enumeration may be
/// scored in parallel; optima are merged back in enumeration order.
pub fn exact_pav_with(
    election: &Election,
    profile: &ApprovalProfile,
    budget: u64,
    exec: Execution,
) -> Result<ExactPav, OracleError> {
    profile.ensure_matches(election)?;
    let total = budget_check(election, budget)?;
    let table = harmonic_table(election.office_count());

    const CHUNK: u64 = 1024;
    let chunks = total.div_ceil(CHUNK) as usize;
    let partial: Vec<(Score, Vec<u64>)> = exec.map_indices(chunks, |chunk| {
        let start = chunk as u64 * CHUNK;
        let end = (start + CHUNK).min(total);
        let mut best = Score::zero();
        let mut at = Vec::new();
        let mut winners = vec![0; election.office_count()];
        for index in start..end {
            decode_winners(election, u128::from(index), &mut winners);
            let score = pav_of(profile, &winners, &table);
            if at.is_empty() || score > best {
                best = score;
                at.clear();
                at.push(index);
            } else if score == best {
                at.push(index);
            }
        }
        (best, at)
    });

    let mut optimal_score = Score::zero();
    let mut indices: Vec<u64> = Vec::new();
    for (score, at) in partial {
        if indices.is_empty() || score > optimal_score {
            optimal_score = score;
            indices = at;
        } else if score == optimal_score {
            indices.extend(at);
        }
    }
    Ok(ExactPav {
        optimal_score,
        optima: indices
            .into_iter()
            .map(|i| committee_at(election, u128::from(i)))
            .collect(),
        committees_examined: total,
    })
}

/// A group of at least n/K voters who all approve `candidate` and approve no
/// member of the committee.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GjrViolation {
    pub candidate: CandidateId,
    pub office: OfficeId,
    pub deserted_group: Vec<VoterId>,
    pub group_size: usize,
    /// n/K, the group size at which a deserted group counts as a violation.
    pub threshold: Score,
}

/// Global justified representation check. A candidate outside the committee
/// witnesses a violation when the voters approving it, but approving no
/// committee member, number at least n/K (`size * K >= n`, all voters
/// counted in n, abstainers included).
pub fn check_gjr(
    election: &Election,
    profile: &ApprovalProfile,
    committee: &Committee,
) -> Result<Vec<GjrViolation>, OracleError> {
    profile.ensure_matches(election)?;
    committee.ensure_matches(election)?;
    let n = profile.voter_count();
    let k = election.office_count();
    let threshold = Score::ratio(n as u64, k as u64);

    let represented: Vec<bool> = (0..n)
        .map(|v| committee.winners().iter().any(|&w| profile.approves(v, w)))
        .collect();

    let mut violations = Vec::new();
    for flat in 0..election.candidate_count() {
        if committee.contains(flat) {
            continue;
        }
        let deserted: Vec<usize> = (0..n)
            .filter(|&v| !represented[v] && profile.approves(v, flat))
            .collect();
        if !deserted.is_empty() && deserted.len() * k >= n {
            let seat = election.seat(flat);
            violations.push(GjrViolation {
                candidate: election.candidate(flat).id.clone(),
                office: election.offices()[seat.office].id.clone(),
                group_size: deserted.len(),
                deserted_group: deserted
                    .into_iter()
                    .map(|v| profile.voter_id(v).clone())
                    .collect(),
                threshold: threshold.clone(),
            });
        }
    }
    Ok(violations)
}

/// Approval count of every candidate (flat order).
pub fn approval_counts(election: &Election, profile: &ApprovalProfile) -> Vec<u64> {
    let mut counts = vec![0u64; election.candidate_count()];
    for v in 0..profile.voter_count() {
        for &c in profile.approved(v) {
            counts[c as usize] += 1;
        }
    }
    counts
}

/// Each office independently goes to its most-approved candidate; ties go to
/// the candidate listed first.
pub fn plurality_baseline(election: &Election, profile: &ApprovalProfile) -> Result<Committee, OracleError> {
    profile.ensure_matches(election)?;
    let counts = approval_counts(election, profile);
    let winners = (0..election.office_count())
        .map(|office| {
            let slate = election.slate(office);
            let mut best = slate.start;
            for flat in slate {
                if counts[flat] > counts[best] {
                    best = flat;
                }
            }
            best
        })
        .collect();
    Ok(Committee::from_flat(election, winners))
}

/// PAV score of the greedy committee divided by the optimal PAV score.
pub fn approximation_ratio(
    election: &Election,
    profile: &ApprovalProfile,
    budget: u64,
) -> Result<Score, OracleError> {
    let exact = exact_pav(election, profile, budget)?;
    if exact.optimal_score.is_zero() {
        return Err(OracleError::DegenerateInstance);
    }
    let (greedy, _) = greedy_pav_with(election, profile, Execution::default())?;
    Ok(pav_score(election, profile, &greedy)? / exact.optimal_score)
}
