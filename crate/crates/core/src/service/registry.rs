//! In-memory session registry with idle expiry.

use std::collections::HashMap;
use std::sync::Arc;

use chrono::{DateTime, TimeDelta, Utc};
use parking_lot::{Mutex, RwLock};

use crate::session::Session;

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self(Mutex::new(start))
    }

    pub fn advance(&self, by: TimeDelta) {
        *self.0.lock() += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock()
    }
}

#[derive(Debug)]
pub struct SessionSlot {
    pub session: Session,
    /// Time of the last successful mutation; stamped into reports.
    pub updated_at: DateTime<Utc>,
}

#[derive(Debug)]
pub struct SessionHandle {
    pub session_id: String,
    pub created_at: DateTime<Utc>,
    last_access: Mutex<DateTime<Utc>>,
    /// Writers are serialized; readers share.
    pub state: RwLock<SessionSlot>,
}

impl SessionHandle {
    pub fn last_access(&self) -> DateTime<Utc> {
        *self.last_access.lock()
    }
}

pub struct SessionRegistry {
    sessions: Mutex<HashMap<String, Arc<SessionHandle>>>,
    ttl: TimeDelta,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for SessionRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionRegistry")
            .field("sessions", &self.sessions.lock().len())
            .field("ttl", &self.ttl)
            .finish()
    }
}

impl SessionRegistry {
    pub fn new(ttl: TimeDelta, clock: Arc<dyn Clock>) -> Self {
        Self { sessions: Mutex::new(HashMap::new()), ttl, clock }
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub fn insert(&self, session: Session) -> Arc<SessionHandle> {
        let now = self.clock.now();
        let mut sessions = self.sessions.lock();
        let id = loop {
            let id = uuid::Uuid::new_v4().simple().to_string();
            if !sessions.contains_key(&id) {
                break id;
            }
        };
        let handle = Arc::new(SessionHandle {
            session_id: id.clone(),
            created_at: now,
            last_access: Mutex::new(now),
            state: RwLock::new(SessionSlot { session, updated_at: now }),
        });
        sessions.insert(id, handle.clone());
        handle
    }

    /// Looks up a live session and refreshes its idle timer.
    pub fn get(&self, id: &str) -> Option<Arc<SessionHandle>> {
        let now = self.clock.now();
        self.sweep_at(now);
        let handle = self.sessions.lock().get(id).cloned()?;
        *handle.last_access.lock() = now;
        Some(handle)
    }

    /// Drops sessions idle for longer than the TTL; returns how many.
    pub fn sweep(&self) -> usize {
        self.sweep_at(self.clock.now())
    }

    fn sweep_at(&self, now: DateTime<Utc>) -> usize {
        let mut sessions = self.sessions.lock();
        let before = sessions.len();
        sessions.retain(|_, h| now - h.last_access() <= self.ttl);
        before - sessions.len()
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ttl(&self) -> TimeDelta {
        self.ttl
    }
}
