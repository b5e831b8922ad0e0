//! In-memory sessions with an append-only JSONL journal.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use imtkit::imt::{ImtError, ImtSession, SessionMetrics, SuffixGenerator};
use imtkit::Sentence;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown session {0}")]
    UnknownSession(u64),
    #[error(transparent)]
    Session(#[from] ImtError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed journal record: {message}")]
    Journal { path: PathBuf, line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JournalEvent {
    Created,
    Corrected,
    Truncated,
    Accepted,
}

/// One journal line: the full session state after an event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalRecord {
    pub event: JournalEvent,
    pub engine: String,
    pub session: ImtSession,
}

/// A session plus the engine it was started with.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSession {
    pub engine: String,
    pub session: ImtSession,
}

#[derive(Debug)]
struct Journal {
    path: PathBuf,
    file: Mutex<File>,
}

impl Journal {
    fn append(&self, record: &JournalRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(record).expect("journal record serializes");
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.write_all(line.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|source| StoreError::Io {
                path: self.path.clone(),
                source,
            })
    }
}

/// Sessions by id. Ids come from a counter that only grows; each session
/// sits behind its own mutex so mutations of one session are serialized
/// while different sessions proceed in parallel.
#[derive(Debug, Default)]
pub struct SessionStore {
    next_id: AtomicU64,
    sessions: RwLock<HashMap<u64, Arc<Mutex<StoredSession>>>>,
    journal: Option<Journal>,
}

/// Reads every record of a journal file in order.
pub fn read_journal(path: &Path) -> Result<Vec<JournalRecord>, StoreError> {
    let io = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| StoreError::Journal {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

impl SessionStore {
    /// A store without persistence. Ids start at 1.
    pub fn in_memory() -> Self {
        SessionStore {
            next_id: AtomicU64::new(1),
            ..Default::default()
        }
    }

    /// Replays the journal at `path` if it exists and appends to it from
    /// then on.
    pub fn with_journal(path: &Path) -> Result<Self, StoreError> {
        let mut store = Self::in_memory();
        if path.exists() {
            store.replay(&read_journal(path)?);
        } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|source| StoreError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| StoreError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        store.journal = Some(Journal {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        });
        Ok(store)
    }

    /// Applies records in order: each one overwrites the state of its
    /// session. Replaying the same records again changes nothing.
    pub fn replay(&mut self, records: &[JournalRecord]) {
        let sessions = self.sessions.get_mut().unwrap_or_else(|e| e.into_inner());
        for r in records {
            let stored = StoredSession {
                engine: r.engine.clone(),
                session: r.session.clone(),
            };
            sessions.insert(r.session.id(), Arc::new(Mutex::new(stored)));
        }
        let max = sessions.keys().copied().max().unwrap_or(0);
        let next = self.next_id.get_mut();
        *next = (*next).max(max + 1);
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.journal.as_ref().map(|j| j.path.as_path())
    }

    fn log(&self, event: JournalEvent, stored: &StoredSession) -> Result<(), StoreError> {
        match &self.journal {
            Some(j) => j.append(&JournalRecord {
                event,
                engine: stored.engine.clone(),
                session: stored.session.clone(),
            }),
            None => Ok(()),
        }
    }

    fn entry(&self, id: u64) -> Result<Arc<Mutex<StoredSession>>, StoreError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(&id)
            .cloned()
            .ok_or(StoreError::UnknownSession(id))
    }

    fn lock(entry: &Mutex<StoredSession>) -> MutexGuard<'_, StoredSession> {
        entry.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Starts a session under a fresh id. A failed start consumes the id.
    pub fn create(
        &self,
        engine: &str,
        generator: &dyn SuffixGenerator,
        source: Sentence,
    ) -> Result<StoredSession, StoreError> {
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let stored = StoredSession {
            engine: engine.to_string(),
            session: ImtSession::start(id, generator, source)?,
        };
        self.log(JournalEvent::Created, &stored)?;
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, Arc::new(Mutex::new(stored.clone())));
        Ok(stored)
    }

    pub fn get(&self, id: u64) -> Result<StoredSession, StoreError> {
        let entry = self.entry(id)?;
        let stored = Self::lock(&entry).clone();
        Ok(stored)
    }

    /// Runs `f` on the session while holding its lock and journals the
    /// new state when `f` succeeds.
    fn mutate<T>(
        &self,
        id: u64,
        event: JournalEvent,
        f: impl FnOnce(&mut ImtSession) -> Result<T, ImtError>,
    ) -> Result<(T, StoredSession), StoreError> {
        let entry = self.entry(id)?;
        let mut guard = Self::lock(&entry);
        let mut next = guard.session.clone();
        let out = f(&mut next)?;
        let updated = StoredSession {
            engine: guard.engine.clone(),
            session: next,
        };
        self.log(event, &updated)?;
        *guard = updated.clone();
        Ok((out, updated))
    }

    pub fn correct(
        &self,
        id: u64,
        generator: &dyn SuffixGenerator,
        position: usize,
        word: &str,
    ) -> Result<StoredSession, StoreError> {
        self.mutate(id, JournalEvent::Corrected, |s| s.apply_correction(generator, position, word))
            .map(|(_, s)| s)
    }

    pub fn truncate(&self, id: u64, position: usize) -> Result<StoredSession, StoreError> {
        self.mutate(id, JournalEvent::Truncated, |s| s.truncate(position))
            .map(|(_, s)| s)
    }

    pub fn accept(&self, id: u64) -> Result<(SessionMetrics, StoredSession), StoreError> {
        self.mutate(id, JournalEvent::Accepted, ImtSession::accept)
    }

    /// Engine name of a session, without holding its lock afterwards.
    pub fn engine_of(&self, id: u64) -> Result<String, StoreError> {
        let entry = self.entry(id)?;
        let engine = Self::lock(&entry).engine.clone();
        Ok(engine)
    }

    /// Every session, ordered by id.
    pub fn snapshot(&self) -> Vec<StoredSession> {
        let entries: Vec<_> = self
            .sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect();
        let mut out: Vec<StoredSession> = entries.iter().map(|e| Self::lock(e).clone()).collect();
        out.sort_by_key(|s| s.session.id());
        out
    }

    /// The id the next session will get.
    pub fn peek_next_id(&self) -> u64 {
        self.next_id.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use imtkit::imt::{simulate_session, CopyGenerator};

    fn s(t: &str) -> Sentence {
        Sentence::from_words(t)
    }

    #[test]
    fn ids_are_monotonic_and_never_reused() {
        let store = SessionStore::in_memory();
        let a = store.create("copy", &CopyGenerator, s("a b")).unwrap();
        let b = store.create("copy", &CopyGenerator, s("c")).unwrap();
        assert_eq!((a.session.id(), b.session.id()), (1, 2));
        assert!(matches!(store.get(9), Err(StoreError::UnknownSession(9))));
    }

    #[test]
    fn counters_match_a_fresh_simulation() {
        let store = SessionStore::in_memory();
        let src = s("vna casa blanca");
        let reference = s("una casa blanca");
        let id = store.create("copy", &CopyGenerator, src.clone()).unwrap().session.id();
        store.correct(id, &CopyGenerator, 1, "una").unwrap();
        let (m, _) = store.accept(id).unwrap();
        let sim = simulate_session(&CopyGenerator, &src, &reference).unwrap();
        assert_eq!(m, sim);
    }

    #[test]
    fn failed_mutation_leaves_state_and_journal_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let store = SessionStore::with_journal(&path).unwrap();
        let id = store.create("copy", &CopyGenerator, s("a b c")).unwrap().session.id();
        let before = store.get(id).unwrap();
        assert!(store.correct(id, &CopyGenerator, 0, "x").is_err());
        assert!(store.correct(id, &CopyGenerator, 2, "two words").is_err());
        assert_eq!(store.get(id).unwrap(), before);
        assert_eq!(read_journal(&path).unwrap().len(), 1);
    }

    #[test]
    fn journal_replay_restores_identical_sessions_idempotently() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sessions").join("journal.jsonl");
        let before = {
            let store = SessionStore::with_journal(&path).unwrap();
            let a = store.create("copy", &CopyGenerator, s("a b c")).unwrap().session.id();
            let b = store.create("copy", &CopyGenerator, s("d e")).unwrap().session.id();
            store.correct(a, &CopyGenerator, 2, "x").unwrap();
            store.truncate(a, 3).unwrap();
            store.accept(a).unwrap();
            store.correct(b, &CopyGenerator, 1, "y").unwrap();
            store.snapshot()
        };
        let restored = SessionStore::with_journal(&path).unwrap();
        assert_eq!(restored.snapshot(), before);
        assert_eq!(restored.peek_next_id(), 3);
        assert!(matches!(
            restored.accept(1),
            Err(StoreError::Session(ImtError::AlreadyAccepted))
        ));

        let records = read_journal(&path).unwrap();
        let mut twice = SessionStore::in_memory();
        twice.replay(&records);
        let once = twice.snapshot();
        twice.replay(&records);
        assert_eq!(twice.snapshot(), once);
        assert_eq!(once, before);
    }
}
