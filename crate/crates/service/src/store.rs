//! In-memory session store with idle expiry.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use triage_core::triage::Session;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Missing {
    Unknown,
    Expired,
}

struct Slot {
    session: Arc<Mutex<Session>>,
    touched: Instant,
}

#[derive(Default)]
struct Inner {
    live: HashMap<String, Slot>,
    expired: HashSet<String>,
}

/// Each session sits behind its own lock, so requests for different
/// sessions only contend on the short map lookup.
pub struct SessionStore {
    ttl: Duration,
    inner: Mutex<Inner>,
}

/// 128 random bits from the operating system, hex encoded.
pub fn new_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        SessionStore {
            ttl,
            inner: Mutex::new(Inner::default()),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn insert(&self, session: Session) {
        let id = session.id.clone();
        let slot = Slot {
            session: Arc::new(Mutex::new(session)),
            touched: Instant::now(),
        };
        self.lock().live.insert(id, slot);
    }

    /// Looks a session up and refreshes its idle timer.
    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, Missing> {
        let now = Instant::now();
        let mut inner = self.lock();
        let inner = &mut *inner;
        match inner.live.get_mut(id) {
            Some(slot) if now.duration_since(slot.touched) <= self.ttl => {
                slot.touched = now;
                Ok(slot.session.clone())
            }
            Some(_) => {
                inner.live.remove(id);
                inner.expired.insert(id.to_string());
                Err(Missing::Expired)
            }
            None if inner.expired.contains(id) => Err(Missing::Expired),
            None => Err(Missing::Unknown),
        }
    }

    /// Drops every idle session; returns how many expired.
    pub fn sweep(&self) -> usize {
        let now = Instant::now();
        let mut inner = self.lock();
        let stale: Vec<String> = inner
            .live
            .iter()
            .filter(|(_, s)| now.duration_since(s.touched) > self.ttl)
            .map(|(id, _)| id.clone())
            .collect();
        for id in &stale {
            inner.live.remove(id);
            inner.expired.insert(id.clone());
        }
        stale.len()
    }

    pub fn len(&self) -> usize {
        self.lock().live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
