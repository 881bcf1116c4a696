//! Domain types: elections made of offices with disjoint candidate slates,
//! approval profiles over those slates, and complete committees.
//!
//! Everything here is constructed through a validating function and is
//! immutable afterwards, so validated values can be shared freely between
//! threads.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Self {
                $name(value.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(value: &str) -> Self {
                $name(value.to_owned())
            }
        }
    };
}

id_type!(
    /// Opaque office identifier, stable under renaming of the display name.
    OfficeId
);
id_type!(
    /// Opaque candidate identifier, unique across the whole election.
    CandidateId
);
id_type!(VoterId);

/// Longest identifier accepted anywhere.
pub const MAX_ID_LEN: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("election has no offices")]
    EmptyElection,
    #[error("office `{office}` has no candidates (at {path})")]
    EmptyOffice { office: OfficeId, path: String },
    #[error("duplicate office id `{id}` at {path}")]
    DuplicateOfficeId { id: OfficeId, path: String },
    #[error("duplicate candidate id `{id}` at {path} (first declared at {first_path})")]
    DuplicateCandidateId {
        id: CandidateId,
        path: String,
        first_path: String,
    },
    #[error("invalid identifier {value:?} at {path}: {reason}")]
    InvalidIdentifier {
        value: String,
        path: String,
        reason: &'static str,
    },
    #[error("profile has no voters")]
    EmptyProfile,
    #[error("duplicate voter id `{voter}` at {path}")]
    DuplicateVoterId { voter: VoterId, path: String },
    #[error("unknown office id `{office}` at {path}")]
    UnknownOfficeId { office: String, path: String },
    #[error("unknown candidate id `{candidate}` at {path}")]
    UnknownCandidateId { candidate: String, path: String },
    #[error(
        "candidate `{candidate}` is filed under office `{filed_under}` but runs for `{runs_for}` (at {path})"
    )]
    CandidateOfficeMismatch {
        candidate: CandidateId,
        filed_under: OfficeId,
        runs_for: OfficeId,
        path: String,
    },
    #[error("committee leaves office `{office}` unfilled")]
    IncompleteCommittee { office: OfficeId },
    #[error("profile or committee was validated against a different election")]
    ElectionMismatch,
}

impl ModelError {
    /// Stable machine-readable name of the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::EmptyElection => "EmptyElection",
            ModelError::EmptyOffice { .. } => "EmptyOffice",
            ModelError::DuplicateOfficeId { .. } => "DuplicateOfficeId",
            ModelError::DuplicateCandidateId { .. } => "DuplicateCandidateId",
            ModelError::InvalidIdentifier { .. } => "InvalidIdentifier",
            ModelError::EmptyProfile => "EmptyProfile",
            ModelError::DuplicateVoterId { .. } => "DuplicateVoterId",
            ModelError::UnknownOfficeId { .. } => "UnknownOfficeId",
            ModelError::UnknownCandidateId { .. } => "UnknownCandidateId",
            ModelError::CandidateOfficeMismatch { .. } => "CandidateOfficeMismatch",
            ModelError::IncompleteCommittee { .. } => "IncompleteCommittee",
            ModelError::ElectionMismatch => "InconsistentInput",
        }
    }

    /// Document path of the offending element, when there is one.
    pub fn path(&self) -> Option<&str> {
        match self {
            ModelError::EmptyOffice { path, .. }
            | ModelError::DuplicateOfficeId { path, .. }
            | ModelError::DuplicateCandidateId { path, .. }
            | ModelError::InvalidIdentifier { path, .. }
            | ModelError::DuplicateVoterId { path, .. }
            | ModelError::UnknownOfficeId { path, .. }
            | ModelError::UnknownCandidateId { path, .. }
            | ModelError::CandidateOfficeMismatch { path, .. } => Some(path),
            _ => None,
        }
    }
}

/// Identifiers are non-empty tokens without whitespace or control characters.
pub fn check_identifier(value: &str, path: impl FnOnce() -> String) -> Result<(), ModelError> {
    let reason = if value.is_empty() {
        Some("identifier is empty")
    } else if value.len() > MAX_ID_LEN {
        Some("identifier is longer than 128 bytes")
    } else if value.chars().any(|c| c.is_whitespace() || c.is_control()) {
        Some("identifier contains whitespace or control characters")
    } else {
        None
    };
    match reason {
        Some(reason) => Err(ModelError::InvalidIdentifier {
            value: value.to_owned(),
            path: path(),
            reason,
        }),
        None => Ok(()),
    }
}

/// Unvalidated election document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionDraft {
    pub name: String,
    pub offices: Vec<OfficeDraft>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfficeDraft {
    pub id: String,
    pub name: String,
    pub candidates: Vec<CandidateDraft>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateDraft {
    pub id: String,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub id: CandidateId,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Office {
    pub id: OfficeId,
    pub name: String,
    /// Order is significant: it breaks ties.
    pub candidates: Vec<Candidate>,
}

/// Position of a candidate inside an election.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Seat {
    pub office: usize,
    /// Index within the office's slate.
    pub position: usize,
    /// Index over all candidates of the election, in office-major order.
    pub flat: usize,
}

/// A validated election: K ≥ 1 offices, each with a non-empty slate, all
/// candidate ids distinct across the election.
#[derive(Clone, Debug)]
pub struct Election {
    name: String,
    offices: Vec<Office>,
    office_index: HashMap<OfficeId, usize>,
    candidate_index: HashMap<CandidateId, Seat>,
    office_offsets: Vec<usize>,
    seats: Vec<Seat>,
    fingerprint: u64,
}

impl PartialEq for Election {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.offices == other.offices
    }
}

impl Eq for Election {}

pub fn validate_election(draft: &ElectionDraft) -> Result<Election, ModelError> {
    if draft.offices.is_empty() {
        return Err(ModelError::EmptyElection);
    }
    let mut office_index = HashMap::new();
    let mut candidate_index: HashMap<CandidateId, Seat> = HashMap::new();
    let mut offices = Vec::with_capacity(draft.offices.len());
    let mut office_offsets = Vec::with_capacity(draft.offices.len());
    let mut seats = Vec::new();

    for (oi, office) in draft.offices.iter().enumerate() {
        let office_path = || format!("offices[{oi}].id");
        check_identifier(&office.id, office_path)?;
        let office_id = OfficeId::new(&office.id);
        if office_index.insert(office_id.clone(), oi).is_some() {
            return Err(ModelError::DuplicateOfficeId {
                id: office_id,
                path: office_path(),
            });
        }
        if office.candidates.is_empty() {
            return Err(ModelError::EmptyOffice {
                office: office_id,
                path: format!("offices[{oi}].candidates"),
            });
        }
        office_offsets.push(seats.len());
        let mut candidates = Vec::with_capacity(office.candidates.len());
        for (ci, candidate) in office.candidates.iter().enumerate() {
            let path = || format!("offices[{oi}].candidates[{ci}].id");
            check_identifier(&candidate.id, path)?;
            let id = CandidateId::new(&candidate.id);
            let seat = Seat {
                office: oi,
                position: ci,
                flat: seats.len(),
            };
            if let Some(first) = candidate_index.get(&id) {
                return Err(ModelError::DuplicateCandidateId {
                    id,
                    path: path(),
                    first_path: format!("offices[{}].candidates[{}].id", first.office, first.position),
                });
            }
            candidate_index.insert(id.clone(), seat);
            seats.push(seat);
            candidates.push(Candidate {
                id,
                name: candidate.name.clone(),
            });
        }
        offices.push(Office {
            id: office_id,
            name: office.name.clone(),
            candidates,
        });
    }

    let mut hasher = DefaultHasher::new();
    for office in &offices {
        office.id.hash(&mut hasher);
        for candidate in &office.candidates {
            candidate.id.hash(&mut hasher);
        }
        0xffu8.hash(&mut hasher);
    }

    Ok(Election {
        name: draft.name.clone(),
        offices,
        office_index,
        candidate_index,
        office_offsets,
        seats,
        fingerprint: hasher.finish(),
    })
}

impl Election {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn offices(&self) -> &[Office] {
        &self.offices
    }

    /// Number of offices, K.
    pub fn office_count(&self) -> usize {
        self.offices.len()
    }

    pub fn candidate_count(&self) -> usize {
        self.seats.len()
    }

    pub fn office_position(&self, office: &str) -> Option<usize> {
        self.office_index.get(office).copied()
    }

    pub fn seat_of(&self, candidate: &str) -> Option<Seat> {
        self.candidate_index.get(candidate).copied()
    }

    /// Seat of the candidate with the given flat index.
    pub fn seat(&self, flat: usize) -> Seat {
        self.seats[flat]
    }

    pub fn candidate(&self, flat: usize) -> &Candidate {
        let seat = self.seats[flat];
        &self.offices[seat.office].candidates[seat.position]
    }

    /// Flat indices of one office's slate.
    pub fn slate(&self, office: usize) -> std::ops::Range<usize> {
        let start = self.office_offsets[office];
        start..start + self.offices[office].candidates.len()
    }

    /// Number of distinct complete committees, or `None` on overflow.
    pub fn committee_count(&self) -> Option<u128> {
        self.offices
            .iter()
            .try_fold(1u128, |acc, o| acc.checked_mul(o.candidates.len() as u128))
    }

    pub fn to_draft(&self) -> ElectionDraft {
        ElectionDraft {
            name: self.name.clone(),
            offices: self
                .offices
                .iter()
                .map(|o| OfficeDraft {
                    id: o.id.to_string(),
                    name: o.name.clone(),
                    candidates: o
                        .candidates
                        .iter()
                        .map(|c| CandidateDraft {
                            id: c.id.to_string(),
                            name: c.name.clone(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub(crate) fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Unvalidated ballot: office id → approved candidate ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallotDraft {
    pub voter_id: String,
    #[serde(default)]
    pub approvals: BTreeMap<String, Vec<String>>,
}

/// One voter's validated approvals. Offices the voter abstained in are absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ballot {
    pub voter_id: VoterId,
    pub approvals: BTreeMap<OfficeId, BTreeSet<CandidateId>>,
}

/// Validated approval ballots for one election, in submission order.
#[derive(Clone, Debug)]
pub struct ApprovalProfile {
    ballots: Vec<Ballot>,
    /// Sorted flat candidate indices approved by each voter.
    approved: Vec<Vec<u32>>,
    election_fingerprint: u64,
}

impl PartialEq for ApprovalProfile {
    fn eq(&self, other: &Self) -> bool {
        self.ballots == other.ballots && self.election_fingerprint == other.election_fingerprint
    }
}

impl Eq for ApprovalProfile {}

/// Validates one ballot against `election`; `path` prefixes error locations.
pub fn validate_ballot(
    election: &Election,
    draft: &BallotDraft,
    path: &str,
) -> Result<(Ballot, Vec<u32>), ModelError> {
    check_identifier(&draft.voter_id, || format!("{path}.voter_id"))?;
    let mut approvals: BTreeMap<OfficeId, BTreeSet<CandidateId>> = BTreeMap::new();
    let mut flat = Vec::new();
    for (office, candidates) in &draft.approvals {
        let Some(oi) = election.office_position(office) else {
            return Err(ModelError::UnknownOfficeId {
                office: office.clone(),
                path: format!("{path}.approvals.{office}"),
            });
        };
        let office_id = election.offices[oi].id.clone();
        for (k, candidate) in candidates.iter().enumerate() {
            let cpath = || format!("{path}.approvals.{office}[{k}]");
            let Some(seat) = election.seat_of(candidate) else {
                return Err(ModelError::UnknownCandidateId {
                    candidate: candidate.clone(),
                    path: cpath(),
                });
            };
            if seat.office != oi {
                return Err(ModelError::CandidateOfficeMismatch {
                    candidate: CandidateId::new(candidate),
                    filed_under: office_id,
                    runs_for: election.offices[seat.office].id.clone(),
                    path: cpath(),
                });
            }
            if approvals
                .entry(office_id.clone())
                .or_default()
                .insert(CandidateId::new(candidate))
            {
                flat.push(seat.flat as u32);
            }
        }
        if candidates.is_empty() {
            // An explicit empty list is an abstention, same as omission.
            approvals.remove(&office_id);
        }
    }
    flat.sort_unstable();
    Ok((
        Ballot {
            voter_id: VoterId::new(&draft.voter_id),
            approvals,
        },
        flat,
    ))
}

pub fn validate_profile(election: &Election, drafts: &[BallotDraft]) -> Result<ApprovalProfile, ModelError> {
    if drafts.is_empty() {
        return Err(ModelError::EmptyProfile);
    }
    let mut seen = HashMap::with_capacity(drafts.len());
    let mut ballots = Vec::with_capacity(drafts.len());
    let mut approved = Vec::with_capacity(drafts.len());
    for (i, draft) in drafts.iter().enumerate() {
        let path = format!("voters[{i}]");
        let (ballot, flat) = validate_ballot(election, draft, &path)?;
        if seen.insert(ballot.voter_id.clone(), i).is_some() {
            return Err(ModelError::DuplicateVoterId {
                voter: ballot.voter_id,
                path: format!("{path}.voter_id"),
            });
        }
        ballots.push(ballot);
        approved.push(flat);
    }
    Ok(ApprovalProfile {
        ballots,
        approved,
        election_fingerprint: election.fingerprint(),
    })
}

impl ApprovalProfile {
    pub fn ballots(&self) -> &[Ballot] {
        &self.ballots
    }

    /// Number of voters, n.
    pub fn voter_count(&self) -> usize {
        self.ballots.len()
    }

    /// Sorted flat candidate indices approved by voter `voter`.
    pub fn approved(&self, voter: usize) -> &[u32] {
        &self.approved[voter]
    }

    pub fn approves(&self, voter: usize, flat: usize) -> bool {
        self.approved[voter].binary_search(&(flat as u32)).is_ok()
    }

    pub fn voter_id(&self, voter: usize) -> &VoterId {
        &self.ballots[voter].voter_id
    }

    /// For every candidate (flat index), the voters approving it, ascending.
    pub fn approvers_by_candidate(&self, election: &Election) -> Vec<Vec<u32>> {
        let mut approvers = vec![Vec::new(); election.candidate_count()];
        for (v, flat) in self.approved.iter().enumerate() {
            for &c in flat {
                approvers[c as usize].push(v as u32);
            }
        }
        approvers
    }

    pub fn ensure_matches(&self, election: &Election) -> Result<(), ModelError> {
        if self.election_fingerprint == election.fingerprint() {
            Ok(())
        } else {
            Err(ModelError::ElectionMismatch)
        }
    }

    pub fn to_drafts(&self) -> Vec<BallotDraft> {
        self.ballots
            .iter()
            .map(|b| BallotDraft {
                voter_id: b.voter_id.to_string(),
                approvals: b
                    .approvals
                    .iter()
                    .map(|(o, cs)| (o.to_string(), cs.iter().map(|c| c.to_string()).collect()))
                    .collect(),
            })
            .collect()
    }
}

/// A complete assignment of one winner to every office.
#[derive(Clone, Debug)]
pub struct Committee {
    /// Flat candidate index of each office's winner, in office order.
    winners: Vec<usize>,
    ids: Vec<(OfficeId, CandidateId)>,
    election_fingerprint: u64,
}

impl PartialEq for Committee {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids
    }
}

impl Eq for Committee {}

impl Committee {
    /// Validates an office → candidate assignment.
    pub fn new(election: &Election, assignment: &BTreeMap<String, String>) -> Result<Committee, ModelError> {
        let mut winners = vec![usize::MAX; election.office_count()];
        for (office, candidate) in assignment {
            let path = format!("committee.{office}");
            let Some(oi) = election.office_position(office) else {
                return Err(ModelError::UnknownOfficeId {
                    office: office.clone(),
                    path,
                });
            };
            let Some(seat) = election.seat_of(candidate) else {
                return Err(ModelError::UnknownCandidateId {
                    candidate: candidate.clone(),
                    path,
                });
            };
            if seat.office != oi {
                return Err(ModelError::CandidateOfficeMismatch {
                    candidate: CandidateId::new(candidate),
                    filed_under: election.offices[oi].id.clone(),
                    runs_for: election.offices[seat.office].id.clone(),
                    path,
                });
            }
            winners[oi] = seat.flat;
        }
        if let Some(missing) = winners.iter().position(|&w| w == usize::MAX) {
            return Err(ModelError::IncompleteCommittee {
                office: election.offices[missing].id.clone(),
            });
        }
        Ok(Committee::from_flat(election, winners))
    }

    /// Builds a committee from one flat candidate index per office.
    ///
    /// Panics if `winners` is not a valid complete assignment for `election`.
    pub fn from_flat(election: &Election, winners: Vec<usize>) -> Committee {
        assert_eq!(winners.len(), election.office_count());
        let ids = winners
            .iter()
            .enumerate()
            .map(|(oi, &flat)| {
                let seat = election.seat(flat);
                assert_eq!(seat.office, oi, "winner does not run for this office");
                (
                    election.offices[oi].id.clone(),
                    election.candidate(flat).id.clone(),
                )
            })
            .collect();
        Committee {
            winners,
            ids,
            election_fingerprint: election.fingerprint(),
        }
    }

    /// Flat indices of the winners, in office order.
    pub fn winners(&self) -> &[usize] {
        &self.winners
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.winners.contains(&flat)
    }

    pub fn winner_of(&self, office: &str) -> Option<&CandidateId> {
        self.ids
            .iter()
            .find(|(o, _)| o.as_str() == office)
            .map(|(_, c)| c)
    }

    /// `(office, winner)` pairs in office order.
    pub fn iter(&self) -> impl Iterator<Item = (&OfficeId, &CandidateId)> {
        self.ids.iter().map(|(o, c)| (o, c))
    }

    pub fn assignment(&self) -> BTreeMap<String, String> {
        self.ids
            .iter()
            .map(|(o, c)| (o.to_string(), c.to_string()))
            .collect()
    }

    pub fn ensure_matches(&self, election: &Election) -> Result<(), ModelError> {
        if self.election_fingerprint == election.fingerprint() {
            Ok(())
        } else {
            Err(ModelError::ElectionMismatch)
        }
    }
}

impl fmt::Display for Committee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (o, c)) in self.ids.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{o}: {c}")?;
        }
        f.write_str("}")
    }
}
