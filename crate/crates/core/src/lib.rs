//! Proportional elections for a set of offices, each contested by its own
//! slate of candidates.
//!
//! The engine fills every office with greedy proportional approval voting
//! ([`tally::greedy_pav`]) and records an audit trail of every round. The
//! [`oracle`] module holds independent checks: the exact PAV optimum by
//! exhaustive search, the global justified representation test, and a
//! per-office plurality baseline. [`io`] defines the file formats and
//! [`sim`] builds bloc electorates for experiments.
//!
//! Hot loops run on rayon when the `parallel` feature is enabled (default);
//! see [`exec::Execution`].

pub mod exec;
pub mod io;
pub mod model;
pub mod oracle;
pub mod score;
pub mod sim;
pub mod tally;

pub use exec::Execution;
pub use model::{
    validate_election, validate_profile, ApprovalProfile, BallotDraft, CandidateId, Committee, Election,
    ElectionDraft, ModelError, OfficeId, VoterId,
};
pub use oracle::{
    approximation_ratio, check_gjr, exact_pav, pav_score, plurality_baseline, GjrViolation, OracleError,
};
pub use score::Score;
pub use tally::{greedy_pav, marginal_score, AuditTrail, RoundRecord, TallyError, TallyState};
