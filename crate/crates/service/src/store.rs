//! In-memory demo sessions.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use cabinet_core::model::{validate_ballot, validate_election, BallotDraft, ElectionDraft};
use cabinet_core::{validate_profile, ApprovalProfile, Election, ModelError};
use rand::RngCore;
use serde::{Deserialize, Serialize};

/// 128 random bits, URL-safe base64 without padding (22 characters).
pub fn new_session_id() -> String {
    let mut bytes = [0u8; 16];
    rand::rng().fill_bytes(&mut bytes);
    URL_SAFE_NO_PAD.encode(bytes)
}

pub struct Session {
    election: Arc<Election>,
    /// Validated ballots in first-submission order.
    ballots: Vec<BallotDraft>,
    by_voter: HashMap<String, usize>,
    /// Bumped on every ballot change.
    revision: u64,
    cached: Option<(u64, Arc<Vec<u8>>)>,
    created_at: Instant,
}

#[derive(Debug, PartialEq, Eq)]
pub enum UpsertError {
    Invalid(ModelError),
    VoterLimitReached { cap: usize },
}

/// A consistent copy of a session's inputs, taken under its lock.
pub struct Snapshot {
    pub election: Arc<Election>,
    pub ballots: Vec<BallotDraft>,
    pub revision: u64,
}

impl Snapshot {
    pub fn profile(&self) -> Result<ApprovalProfile, ModelError> {
        validate_profile(&self.election, &self.ballots)
    }
}

impl Session {
    fn new(election: Election) -> Session {
        Session {
            election: Arc::new(election),
            ballots: Vec::new(),
            by_voter: HashMap::new(),
            revision: 0,
            cached: None,
            created_at: Instant::now(),
        }
    }

    pub fn election(&self) -> &Arc<Election> {
        &self.election
    }

    pub fn ballots(&self) -> &[BallotDraft] {
        &self.ballots
    }

    pub fn voter_count(&self) -> usize {
        self.ballots.len()
    }

    /// Adds a ballot, or replaces the earlier ballot of the same voter in
    /// place. Returns the voter count.
    pub fn upsert(&mut self, draft: BallotDraft, cap: usize) -> Result<usize, UpsertError> {
        validate_ballot(&self.election, &draft, "ballot").map_err(UpsertError::Invalid)?;
        match self.by_voter.get(&draft.voter_id) {
            Some(&slot) => self.ballots[slot] = draft,
            None => {
                if self.ballots.len() >= cap {
                    return Err(UpsertError::VoterLimitReached { cap });
                }
                self.by_voter.insert(draft.voter_id.clone(), self.ballots.len());
                self.ballots.push(draft);
            }
        }
        self.revision += 1;
        self.cached = None;
        Ok(self.ballots.len())
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            election: Arc::clone(&self.election),
            ballots: self.ballots.clone(),
            revision: self.revision,
        }
    }

    pub fn cached_results(&self) -> Option<Arc<Vec<u8>>> {
        self.cached
            .as_ref()
            .filter(|(rev, _)| *rev == self.revision)
            .map(|(_, bytes)| Arc::clone(bytes))
    }

    /// Stores results computed from the snapshot with `revision`, unless the
    /// ballots changed since.
    pub fn store_results(&mut self, revision: u64, bytes: Arc<Vec<u8>>) {
        if revision == self.revision {
            self.cached = Some((revision, bytes));
        }
    }
}

pub type SessionHandle = Arc<Mutex<Session>>;

pub struct SessionStore {
    sessions: RwLock<HashMap<String, SessionHandle>>,
    ttl: Duration,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> SessionStore {
        SessionStore {
            sessions: RwLock::new(HashMap::new()),
            ttl,
        }
    }

    pub fn create(&self, election: Election) -> String {
        self.purge_expired();
        let id = new_session_id();
        let session = Arc::new(Mutex::new(Session::new(election)));
        self.sessions.write().unwrap().insert(id.clone(), session);
        id
    }

    /// The session, unless unknown or expired.
    pub fn get(&self, id: &str) -> Option<SessionHandle> {
        let handle = self.sessions.read().unwrap().get(id).cloned()?;
        let expired = handle.lock().unwrap().created_at.elapsed() >= self.ttl;
        if expired {
            self.sessions.write().unwrap().remove(id);
            return None;
        }
        Some(handle)
    }

    pub fn purge_expired(&self) -> usize {
        let mut sessions = self.sessions.write().unwrap();
        let before = sessions.len();
        sessions.retain(|_, s| s.lock().unwrap().created_at.elapsed() < self.ttl);
        before - sessions.len()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_snapshot(&self) -> StoreSnapshot {
        let sessions = self.sessions.read().unwrap();
        let mut saved: Vec<SavedSession> = sessions
            .iter()
            .map(|(id, s)| {
                let s = s.lock().unwrap();
                SavedSession {
                    id: id.clone(),
                    age_seconds: s.created_at.elapsed().as_secs(),
                    election: s.election.to_draft(),
                    ballots: s.ballots.clone(),
                }
            })
            .collect();
        saved.sort_by(|a, b| a.id.cmp(&b.id));
        StoreSnapshot { sessions: saved }
    }

    /// Loads saved sessions, skipping any that no longer validate or have
    /// outlived the TTL. Returns how many were restored.
    pub fn restore(&self, snapshot: StoreSnapshot) -> usize {
        let mut restored = 0;
        let mut sessions = self.sessions.write().unwrap();
        for saved in snapshot.sessions {
            let age = Duration::from_secs(saved.age_seconds);
            if age >= self.ttl {
                continue;
            }
            let Ok(election) = validate_election(&saved.election) else {
                continue;
            };
            let mut session = Session::new(election);
            if saved
                .ballots
                .into_iter()
                .map(|b| session.upsert(b, usize::MAX))
                .any(|r| r.is_err())
            {
                continue;
            }
            session.created_at = Instant::now().checked_sub(age).unwrap_or_else(Instant::now);
            sessions.insert(saved.id, Arc::new(Mutex::new(session)));
            restored += 1;
        }
        restored
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreSnapshot {
    pub sessions: Vec<SavedSession>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedSession {
    pub id: String,
    pub age_seconds: u64,
    pub election: ElectionDraft,
    pub ballots: Vec<BallotDraft>,
}
