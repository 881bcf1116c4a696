//! On-disk and on-wire formats.
//!
//! * Election file: JSON `{"name", "offices": [{"id", "name", "candidates": [{"id", "name"}]}]}`.
//!   Office and candidate order in the file is the tie-breaking order.
//! * Ballot file: CSV with header `voter_id,office_id,candidate_id`, one row
//!   per approval. Rows of one voter need not be contiguous, and repeated
//!   rows collapse. A row with empty office and candidate columns registers
//!   a voter who approves nothing.
//! * Results file: canonical JSON (sorted keys, exact `{"num", "den"}`
//!   fractions, no floats) holding the committee, the round-by-round audit
//!   trail and the GJR check.
//! * Upload document: JSON `{"election": <election file>, "ballots_csv": "<ballot file>"}`.
//!
//! Parsing never panics; every failure carries a location.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    check_identifier, validate_election, validate_profile, ApprovalProfile, BallotDraft, Committee, Election,
    ElectionDraft, ModelError,
};
use crate::oracle::{check_gjr, GjrViolation, OracleError};
use crate::score::Score;
use crate::tally::{greedy_pav, AuditTrail};

/// Version stamped into every results document.
pub const SCHEMA_VERSION: u32 = 1;

pub const BALLOT_HEADER: [&str; 3] = ["voter_id", "office_id", "candidate_id"];

/// Where in an input a problem was found.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Location {
    /// JSON text position, 1-based.
    Text { line: usize, column: usize },
    /// Path inside a JSON document, e.g. `offices[1].candidates[0].id`.
    Path { path: String },
    /// CSV line number, 1-based, header included.
    Row { row: u64 },
    /// The input as a whole (e.g. it is empty).
    Document,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Text { line, column } => write!(f, "line {line}, column {column}"),
            Location::Path { path } => f.write_str(path),
            Location::Row { row } => write!(f, "row {row}"),
            Location::Document => f.write_str("document"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("malformed document at line {line}, column {column}: {message}")]
    MalformedDocument {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{source}")]
    Invalid {
        #[source]
        source: ModelError,
        /// Prefix added to the model error's path (e.g. `election.`).
        prefix: String,
    },
    #[error("malformed CSV at row {row}: {message}")]
    MalformedCsv { row: u64, message: String },
    #[error("missing header: expected `voter_id,office_id,candidate_id`, found `{found}`")]
    MissingHeader { found: String },
    #[error("unknown office id `{office}` at row {row}")]
    UnknownOfficeId { row: u64, office: String },
    #[error("unknown candidate id `{candidate}` at row {row}")]
    UnknownCandidateId { row: u64, candidate: String },
    #[error("candidate `{candidate}` runs for office `{runs_for}`, not `{office}` (row {row})")]
    CandidateOfficeMismatch {
        row: u64,
        candidate: String,
        office: String,
        runs_for: String,
    },
    #[error("invalid voter id {value:?} at row {row}: {reason}")]
    InvalidVoterId {
        row: u64,
        value: String,
        reason: &'static str,
    },
    #[error("ballot file contains no voters")]
    EmptyProfile,
}

impl FormatError {
    pub fn code(&self) -> &'static str {
        match self {
            FormatError::MalformedDocument { .. } => "MalformedDocument",
            FormatError::Invalid { source, .. } => source.code(),
            FormatError::MalformedCsv { .. } => "MalformedCsv",
            FormatError::MissingHeader { .. } => "MissingHeader",
            FormatError::UnknownOfficeId { .. } => "UnknownOfficeId",
            FormatError::UnknownCandidateId { .. } => "UnknownCandidateId",
            FormatError::CandidateOfficeMismatch { .. } => "CandidateOfficeMismatch",
            FormatError::InvalidVoterId { .. } => "InvalidIdentifier",
            FormatError::EmptyProfile => "EmptyProfile",
        }
    }

    pub fn location(&self) -> Location {
        match self {
            FormatError::MalformedDocument { line, column, .. } => Location::Text {
                line: *line,
                column: *column,
            },
            FormatError::Invalid { source, prefix } => match source.path() {
                Some(path) => Location::Path {
                    path: format!("{prefix}{path}"),
                },
                None if matches!(source, ModelError::EmptyElection) => Location::Path {
                    path: format!("{prefix}offices"),
                },
                None => Location::Document,
            },
            FormatError::MalformedCsv { row, .. }
            | FormatError::UnknownOfficeId { row, .. }
            | FormatError::UnknownCandidateId { row, .. }
            | FormatError::CandidateOfficeMismatch { row, .. }
            | FormatError::InvalidVoterId { row, .. } => Location::Row { row: *row },
            FormatError::MissingHeader { .. } => Location::Row { row: 1 },
            FormatError::EmptyProfile => Location::Document,
        }
    }

    fn invalid(source: ModelError, prefix: &str) -> Self {
        FormatError::Invalid {
            source,
            prefix: prefix.to_owned(),
        }
    }
}

impl From<serde_json::Error> for FormatError {
    fn from(err: serde_json::Error) -> Self {
        FormatError::MalformedDocument {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

pub fn parse_election(bytes: &[u8]) -> Result<Election, FormatError> {
    let draft: ElectionDraft = serde_json::from_slice(bytes)?;
    validate_election(&draft).map_err(|e| FormatError::invalid(e, ""))
}

pub fn write_election(election: &Election) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&election.to_draft()).expect("drafts serialize");
    out.push(b'\n');
    out
}

pub fn parse_ballots(bytes: &[u8], election: &Election) -> Result<ApprovalProfile, FormatError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let mut records = reader.byte_records();
    let header = match records.next() {
        None => return Err(FormatError::EmptyProfile),
        Some(record) => record.map_err(|e| csv_error(&e, 1))?,
    };
    if header.iter().ne(BALLOT_HEADER.iter().map(|h| h.as_bytes())) {
        return Err(FormatError::MissingHeader {
            found: String::from_utf8_lossy(&header.as_slice()[..header.as_slice().len().min(120)])
                .into_owned(),
        });
    }

    let mut drafts: Vec<BallotDraft> = Vec::new();
    let mut by_voter: HashMap<String, usize> = HashMap::new();
    let mut last_row = 1;
    for record in records {
        let record = record.map_err(|e| csv_error(&e, last_row + 1))?;
        let row = record.position().map_or(last_row + 1, |p| p.line());
        last_row = row;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 3 {
            return Err(FormatError::MalformedCsv {
                row,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let field = |i: usize| {
            std::str::from_utf8(&record[i]).map_err(|_| FormatError::MalformedCsv {
                row,
                message: "invalid UTF-8".to_owned(),
            })
        };
        let (voter, office, candidate) = (field(0)?, field(1)?, field(2)?);

        check_identifier(voter, String::new).map_err(|e| match e {
            ModelError::InvalidIdentifier { value, reason, .. } => {
                FormatError::InvalidVoterId { row, value, reason }
            }
            other => FormatError::invalid(other, ""),
        })?;

        let approval = match (office.is_empty(), candidate.is_empty()) {
            (true, true) => None,
            (false, false) => {
                let office_pos =
                    election
                        .office_position(office)
                        .ok_or_else(|| FormatError::UnknownOfficeId {
                            row,
                            office: office.to_owned(),
                        })?;
                let seat = election
                    .seat_of(candidate)
                    .ok_or_else(|| FormatError::UnknownCandidateId {
                        row,
                        candidate: candidate.to_owned(),
                    })?;
                if seat.office != office_pos {
                    return Err(FormatError::CandidateOfficeMismatch {
                        row,
                        candidate: candidate.to_owned(),
                        office: office.to_owned(),
                        runs_for: election.offices()[seat.office].id.to_string(),
                    });
                }
                Some((office, candidate))
            }
            _ => {
                return Err(FormatError::MalformedCsv {
                    row,
                    message: "office_id and candidate_id must both be set or both be empty".to_owned(),
                })
            }
        };

        let slot = *by_voter.entry(voter.to_owned()).or_insert_with(|| {
            drafts.push(BallotDraft {
                voter_id: voter.to_owned(),
                approvals: BTreeMap::new(),
            });
            drafts.len() - 1
        });
        if let Some((office, candidate)) = approval {
            drafts[slot]
                .approvals
                .entry(office.to_owned())
                .or_default()
                .push(candidate.to_owned());
        }
    }

    if drafts.is_empty() {
        return Err(FormatError::EmptyProfile);
    }
    validate_profile(election, &drafts).map_err(|e| FormatError::invalid(e, ""))
}

fn csv_error(err: &csv::Error, fallback_row: u64) -> FormatError {
    let row = err.position().map_or(fallback_row, |p| p.line());
    FormatError::MalformedCsv {
        row,
        message: err.to_string(),
    }
}

/// Ballot CSV in profile order; each voter's approvals in election order.
pub fn write_ballots(election: &Election, profile: &ApprovalProfile) -> Vec<u8> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(BALLOT_HEADER).expect("in-memory write");
    for v in 0..profile.voter_count() {
        let voter = profile.voter_id(v).as_str();
        let approved = profile.approved(v);
        if approved.is_empty() {
            writer.write_record([voter, "", ""]).expect("in-memory write");
        }
        for &flat in approved {
            let flat = flat as usize;
            let office = &election.offices()[election.seat(flat).office].id;
            let candidate = &election.candidate(flat).id;
            writer
                .write_record([voter, office.as_str(), candidate.as_str()])
                .expect("in-memory write");
        }
    }
    writer.into_inner().expect("in-memory flush")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UploadDocument {
    pub election: ElectionDraft,
    pub ballots_csv: String,
}

/// Parses a combined election + ballots document.
pub fn parse_upload(bytes: &[u8]) -> Result<(Election, ApprovalProfile), FormatError> {
    let doc: UploadDocument = serde_json::from_slice(bytes)?;
    let election = validate_election(&doc.election).map_err(|e| FormatError::invalid(e, "election."))?;
    let profile = parse_ballots(doc.ballots_csv.as_bytes(), &election)?;
    Ok((election, profile))
}

pub fn write_upload(election: &Election, profile: &ApprovalProfile) -> Vec<u8> {
    let doc = UploadDocument {
        election: election.to_draft(),
        ballots_csv: String::from_utf8(write_ballots(election, profile)).expect("ids are UTF-8"),
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("upload serializes");
    out.push(b'\n');
    out
}

/// A committee file: either a bare `{office: candidate}` object or any
/// document with such an object under `"committee"` (e.g. a results file).
pub fn parse_committee(bytes: &[u8], election: &Election) -> Result<Committee, FormatError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum CommitteeFile {
        Wrapped { committee: BTreeMap<String, String> },
        Bare(BTreeMap<String, String>),
    }
    let map = match serde_json::from_slice::<CommitteeFile>(bytes)? {
        CommitteeFile::Wrapped { committee } | CommitteeFile::Bare(committee) => committee,
    };
    Committee::new(election, &map).map_err(|e| FormatError::invalid(e, ""))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub schema_version: u32,
    pub committee: BTreeMap<String, String>,
    pub rounds: Vec<RoundDocument>,
    pub gjr: GjrDocument,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundDocument {
    pub round_index: usize,
    pub candidate_scores: BTreeMap<String, Score>,
    pub winner_office: String,
    pub winner_candidate: String,
    pub winner_score: Score,
    pub tied_with: Vec<OfficeCandidate>,
    pub satisfied_voters: Vec<String>,
    pub unsupported: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfficeCandidate {
    pub office: String,
    pub candidate: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GjrDocument {
    pub violations: Vec<ViolationDocument>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationDocument {
    pub candidate: String,
    pub office: String,
    pub deserted_group: Vec<String>,
    pub group_size: usize,
    pub threshold: Score,
}

impl ResultsDocument {
    pub fn new(committee: &Committee, trail: &AuditTrail, violations: &[GjrViolation]) -> Self {
        ResultsDocument {
            schema_version: SCHEMA_VERSION,
            committee: committee.assignment(),
            rounds: trail
                .rounds
                .iter()
                .map(|r| RoundDocument {
                    round_index: r.round,
                    candidate_scores: r
                        .scores
                        .iter()
                        .map(|s| (s.candidate.to_string(), s.score.clone()))
                        .collect(),
                    winner_office: r.winner_office.to_string(),
                    winner_candidate: r.winner_candidate.to_string(),
                    winner_score: r.winner_score.clone(),
                    tied_with: r
                        .tied_with
                        .iter()
                        .map(|(o, c)| OfficeCandidate {
                            office: o.to_string(),
                            candidate: c.to_string(),
                        })
                        .collect(),
                    satisfied_voters: r.satisfied_voters.iter().map(|v| v.to_string()).collect(),
                    unsupported: r.unsupported,
                })
                .collect(),
            gjr: GjrDocument {
                violations: violations
                    .iter()
                    .map(|v| ViolationDocument {
                        candidate: v.candidate.to_string(),
                        office: v.office.to_string(),
                        deserted_group: v.deserted_group.iter().map(|x| x.to_string()).collect(),
                        group_size: v.group_size,
                        threshold: v.threshold.clone(),
                    })
                    .collect(),
            },
        }
    }

    /// Canonical bytes: pretty-printed, keys sorted at every level, trailing
    /// newline.
    pub fn to_bytes(&self) -> Vec<u8> {
        // Going through `Value` sorts every object's keys.
        let value = serde_json::to_value(self).expect("results serialize");
        let mut out = serde_json::to_vec_pretty(&value).expect("value serializes");
        out.push(b'\n');
        out
    }
}

pub fn write_results(committee: &Committee, trail: &AuditTrail, violations: &[GjrViolation]) -> Vec<u8> {
    ResultsDocument::new(committee, trail, violations).to_bytes()
}

pub fn read_results(bytes: &[u8]) -> Result<ResultsDocument, FormatError> {
    Ok(serde_json::from_slice(bytes)?)
}

/// Greedy tally plus GJR check, rendered as a results file. This is the one
/// path every front end uses to produce results.
pub fn tally_results(election: &Election, profile: &ApprovalProfile) -> Result<Vec<u8>, OracleError> {
    let (committee, trail) = greedy_pav(election, profile)?;
    let violations = check_gjr(election, profile, &committee)?;
    Ok(write_results(&committee, &trail, &violations))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR_ELECTION: &str = r#"{
        "name": "four",
        "offices": [
            {"id": "o1", "name": "Office 1", "candidates": [{"id": "A1", "name": "A one"}, {"id": "B1", "name": "B one"}]},
            {"id": "o2", "name": "Office 2", "candidates": [{"id": "A2", "name": "A two"}, {"id": "B2", "name": "B two"}]}
        ]
    }"#;

    const FOUR_BALLOTS: &str = "voter_id,office_id,candidate_id\n\
        v1,o1,A1\nv2,o1,A1\nv3,o1,B1\nv4,o1,B1\n\
        v1,o2,A2\nv2,o2,A2\nv3,o2,B2\nv4,o2,B2\n";

    #[test]
    fn election_minimal_and_duplicate() {
        let e = parse_election(
            br#"{"name":"x","offices":[{"id":"o1","name":"O","candidates":[{"id":"a","name":"A"}]}]}"#,
        )
        .unwrap();
        assert_eq!(e.office_count(), 1);

        let err = parse_election(
            br#"{"name":"x","offices":[
            {"id":"o1","name":"O","candidates":[{"id":"a","name":"A"}]},
            {"id":"o2","name":"P","candidates":[{"id":"b","name":"B"},{"id":"a","name":"A"}]}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.code(), "DuplicateCandidateId");
        assert_eq!(
            err.location(),
            Location::Path {
                path: "offices[1].candidates[1].id".into()
            }
        );
    }

    #[test]
    fn election_malformed_is_located() {
        let err = parse_election(b"{\"name\": \"x\",\n  \"offices\": [}").unwrap_err();
        assert_eq!(err.code(), "MalformedDocument");
        assert!(matches!(err.location(), Location::Text { line: 2, .. }));
        let err = parse_election(br#"{"name":"x","offices":[]}"#).unwrap_err();
        assert_eq!(err.code(), "EmptyElection");
    }

    #[test]
    fn ballots_non_contiguous_and_duplicates() {
        let e = parse_election(FOUR_ELECTION.as_bytes()).unwrap();
        let p = parse_ballots(
            b"voter_id,office_id,candidate_id\nv1,o1,A1\nv2,o1,B1\nv1,o2,B2\n",
            &e,
        )
        .unwrap();
        assert_eq!(p.voter_count(), 2);
        assert_eq!(p.approved(0), &[0, 3]);

        let once = parse_ballots(b"voter_id,office_id,candidate_id\nv1,o1,A1\n", &e).unwrap();
        let twice = parse_ballots(b"voter_id,office_id,candidate_id\nv1,o1,A1\nv1,o1,A1\n", &e).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn ballots_errors_carry_rows() {
        let e = parse_election(FOUR_ELECTION.as_bytes()).unwrap();
        let cases: [(&[u8], &str, u64); 6] = [
            (
                b"voter_id,office_id,candidate_id\nv1,o1,A1\nv2,o9,A1\n",
                "UnknownOfficeId",
                3,
            ),
            (
                b"voter_id,office_id,candidate_id\nv1,o1,ZZ\n",
                "UnknownCandidateId",
                2,
            ),
            (
                b"voter_id,office_id,candidate_id\nv1,o2,A1\n",
                "CandidateOfficeMismatch",
                2,
            ),
            (b"voter_id,office_id,candidate_id\nv1,o1\n", "MalformedCsv", 2),
            (b"voter_id,office_id,candidate_id\nv1,o1,\n", "MalformedCsv", 2),
            (b"voter,office,candidate\nv1,o1,A1\n", "MissingHeader", 1),
        ];
        for (input, code, row) in cases {
            let err = parse_ballots(input, &e).unwrap_err();
            assert_eq!(err.code(), code, "{err}");
            assert_eq!(err.location(), Location::Row { row });
        }
        assert_eq!(parse_ballots(b"", &e).unwrap_err(), FormatError::EmptyProfile);
        assert_eq!(
            parse_ballots(b"voter_id,office_id,candidate_id\n", &e).unwrap_err(),
            FormatError::EmptyProfile
        );
    }

    #[test]
    fn abstaining_voter_round_trips() {
        let e = parse_election(FOUR_ELECTION.as_bytes()).unwrap();
        let p = parse_ballots(b"voter_id,office_id,candidate_id\nv1,,\nv2,o1,A1\n", &e).unwrap();
        assert_eq!(p.voter_count(), 2);
        let written = write_ballots(&e, &p);
        assert_eq!(
            String::from_utf8(written.clone()).unwrap(),
            "voter_id,office_id,candidate_id\nv1,,\nv2,o1,A1\n"
        );
        assert_eq!(parse_ballots(&written, &e).unwrap(), p);
    }

    #[test]
    fn results_are_canonical() {
        let e = parse_election(FOUR_ELECTION.as_bytes()).unwrap();
        let p = parse_ballots(FOUR_BALLOTS.as_bytes(), &e).unwrap();
        let a = tally_results(&e, &p).unwrap();
        let b = tally_results(&e, &p).unwrap();
        assert_eq!(a, b);
        let doc = read_results(&a).unwrap();
        assert_eq!(doc.committee["o1"], "A1");
        assert_eq!(doc.committee["o2"], "B2");
        assert_eq!(doc.rounds.len(), 2);
        assert_eq!(doc.rounds[1].candidate_scores["A2"], Score::from(1));

        let text = String::from_utf8(a).unwrap();
        assert!(text.contains("\"gjr\": {\n    \"violations\": []\n  }"), "{text}");
        assert!(!text.contains('.'), "no decimals expected: {text}");
    }

    #[test]
    fn upload_document() {
        let e = parse_election(FOUR_ELECTION.as_bytes()).unwrap();
        let p = parse_ballots(FOUR_BALLOTS.as_bytes(), &e).unwrap();
        let doc = write_upload(&e, &p);
        let (e2, p2) = parse_upload(&doc).unwrap();
        assert_eq!(e, e2);
        assert_eq!(p, p2);

        let bad = br#"{"election":{"name":"x","offices":[]},"ballots_csv":""}"#;
        let err = parse_upload(bad).unwrap_err();
        assert_eq!(
            err.location(),
            Location::Path {
                path: "election.offices".into()
            }
        );
    }

    #[test]
    fn committee_file_forms() {
        let e = parse_election(FOUR_ELECTION.as_bytes()).unwrap();
        let bare = parse_committee(br#"{"o1":"A1","o2":"A2"}"#, &e).unwrap();
        let wrapped = parse_committee(br#"{"committee":{"o1":"A1","o2":"A2"},"x":1}"#, &e).unwrap();
        assert_eq!(bare, wrapped);
        assert_eq!(
            parse_committee(br#"{"o1":"A1"}"#, &e).unwrap_err().code(),
            "IncompleteCommittee"
        );
    }
}
