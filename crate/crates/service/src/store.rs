//! Versioned in-memory model store.
//!
//! Each session holds an append-only history of immutable networks. Readers
//! take an `Arc` snapshot of one version under a short read lock, so a query
//! always answers against exactly one stored version; writers hold the
//! session's write lock for the whole read-modify-append step.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use belief_tuner::{Event, Evidence, MetaParameterRef, Network};
use parking_lot::RwLock;
use uuid::Uuid;

#[derive(Debug, Clone, Copy)]
pub struct StoreConfig {
    /// Oldest versions are evicted past this many.
    pub max_versions: usize,
    pub max_watches: usize,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            max_versions: 100,
            max_watches: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WatchQuery {
    #[serde(default)]
    pub evidence: Evidence,
    pub target: Event,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StoreError {
    UnknownSession,
    UnknownVersion(u64),
    TooManyWatches(usize),
    Model(belief_tuner::Error),
}

impl From<belief_tuner::Error> for StoreError {
    fn from(e: belief_tuner::Error) -> Self {
        StoreError::Model(e)
    }
}

#[derive(Debug)]
struct Session {
    history: VecDeque<Arc<Network>>,
    watches: Vec<WatchQuery>,
}

impl Session {
    fn latest(&self) -> Arc<Network> {
        self.history
            .back()
            .expect("sessions are never empty")
            .clone()
    }

    fn get(&self, version: u64) -> Option<Arc<Network>> {
        // Versions are contiguous, so the position is an offset from the oldest.
        let oldest = self.history.front()?.version();
        let offset = usize::try_from(version.checked_sub(oldest)?).ok()?;
        self.history.get(offset).cloned()
    }

    fn push(&mut self, network: Network, max_versions: usize) -> Arc<Network> {
        let network = Arc::new(network);
        self.history.push_back(network.clone());
        while self.history.len() > max_versions.max(1) {
            self.history.pop_front();
        }
        network
    }
}

/// Result of appending a parameter change.
#[derive(Debug, Clone)]
pub struct Applied {
    pub previous: Arc<Network>,
    pub current: Arc<Network>,
    pub watches: Vec<WatchQuery>,
}

#[derive(Debug, Default)]
pub struct ModelStore {
    sessions: RwLock<HashMap<Uuid, Arc<RwLock<Session>>>>,
    config: StoreConfig,
}

impl ModelStore {
    pub fn new(config: StoreConfig) -> Self {
        Self {
            sessions: RwLock::new(HashMap::new()),
            config,
        }
    }

    pub fn config(&self) -> StoreConfig {
        self.config
    }

    /// Stores `network` as version 0 of a fresh session.
    pub fn create(&self, network: Network) -> (Uuid, u64) {
        let id = Uuid::new_v4();
        let network = network.with_version(0);
        let session = Session {
            history: VecDeque::from([Arc::new(network)]),
            watches: Vec::new(),
        };
        self.sessions
            .write()
            .insert(id, Arc::new(RwLock::new(session)));
        (id, 0)
    }

    fn session(&self, id: Uuid) -> Result<Arc<RwLock<Session>>, StoreError> {
        self.sessions
            .read()
            .get(&id)
            .cloned()
            .ok_or(StoreError::UnknownSession)
    }

    /// The requested version, or the latest when `version` is `None`.
    pub fn snapshot(&self, id: Uuid, version: Option<u64>) -> Result<Arc<Network>, StoreError> {
        let session = self.session(id)?;
        let session = session.read();
        match version {
            None => Ok(session.latest()),
            Some(v) => session.get(v).ok_or(StoreError::UnknownVersion(v)),
        }
    }

    pub fn versions(&self, id: Uuid) -> Result<Vec<u64>, StoreError> {
        let session = self.session(id)?;
        let versions = session.read().history.iter().map(|n| n.version()).collect();
        Ok(versions)
    }

    pub fn history(&self, id: Uuid) -> Result<Vec<Arc<Network>>, StoreError> {
        let session = self.session(id)?;
        let history = session.read().history.iter().cloned().collect();
        Ok(history)
    }

    /// Changes one parameter of the latest version and appends the result.
    pub fn apply(
        &self,
        id: Uuid,
        param: &MetaParameterRef,
        new_tau: f64,
    ) -> Result<Applied, StoreError> {
        let session = self.session(id)?;
        let mut session = session.write();
        let previous = session.latest();
        let next = previous.apply_change(param, new_tau)?;
        let current = session.push(next, self.config.max_versions);
        Ok(Applied {
            previous,
            current,
            watches: session.watches.clone(),
        })
    }

    /// Appends a copy of `version` as the new latest version.
    pub fn revert(&self, id: Uuid, version: u64) -> Result<Arc<Network>, StoreError> {
        let session = self.session(id)?;
        let mut session = session.write();
        let target = session
            .get(version)
            .ok_or(StoreError::UnknownVersion(version))?;
        let next = target.with_version(session.latest().version() + 1);
        Ok(session.push(next, self.config.max_versions))
    }

    pub fn add_watch(&self, id: Uuid, watch: WatchQuery) -> Result<usize, StoreError> {
        let session = self.session(id)?;
        let mut session = session.write();
        if session.watches.len() >= self.config.max_watches {
            return Err(StoreError::TooManyWatches(self.config.max_watches));
        }
        session.watches.push(watch);
        Ok(session.watches.len() - 1)
    }

    pub fn watches(&self, id: Uuid) -> Result<Vec<WatchQuery>, StoreError> {
        let session = self.session(id)?;
        let watches = session.read().watches.clone();
        Ok(watches)
    }
}
