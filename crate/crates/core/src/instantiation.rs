use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;

/// A single `variable = state` assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub variable: String,
    pub state: String,
}

impl Event {
    pub fn new(variable: impl Into<String>, state: impl Into<String>) -> Self {
        Self {
            variable: variable.into(),
            state: state.into(),
        }
    }

    /// Resolves to `(variable index, state index)`.
    pub fn resolve(&self, network: &Network) -> Result<(usize, usize)> {
        resolve_pair(network, &self.variable, &self.state)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.variable, self.state)
    }
}

/// A partial assignment of states to variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Instantiation {
    assignments: BTreeMap<String, String>,
}

/// Observed variables; query events must not mention them.
pub type Evidence = Instantiation;

impl Instantiation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from pairs, rejecting a variable assigned twice.
    pub fn from_pairs<V, S>(pairs: impl IntoIterator<Item = (V, S)>) -> Result<Self>
    where
        V: Into<String>,
        S: Into<String>,
    {
        let mut out = Self::new();
        for (v, s) in pairs {
            out.insert(Event::new(v, s))?;
        }
        Ok(out)
    }

    pub fn insert(&mut self, event: Event) -> Result<()> {
        if self.assignments.contains_key(&event.variable) {
            return Err(Error::DuplicateAssignment(event.variable));
        }
        self.assignments.insert(event.variable, event.state);
        Ok(())
    }

    /// This instantiation extended by `event`.
    pub fn with(&self, event: &Event) -> Result<Self> {
        let mut out = self.clone();
        out.insert(event.clone())?;
        Ok(out)
    }

    pub fn get(&self, variable: &str) -> Option<&str> {
        self.assignments.get(variable).map(String::as_str)
    }

    pub fn contains(&self, variable: &str) -> bool {
        self.assignments.contains_key(variable)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.assignments
            .iter()
            .map(|(v, s)| (v.as_str(), s.as_str()))
    }

    /// Dense form indexed by variable: `Some(state)` where assigned.
    pub fn resolve(&self, network: &Network) -> Result<Vec<Option<usize>>> {
        let mut dense = vec![None; network.len()];
        for (v, s) in &self.assignments {
            let (vi, si) = resolve_pair(network, v, s)?;
            dense[vi] = Some(si);
        }
        Ok(dense)
    }
}

impl fmt::Display for Instantiation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .assignments
            .iter()
            .map(|(v, s)| format!("{v}={s}"))
            .collect();
        f.write_str(&parts.join(","))
    }
}

fn resolve_pair(network: &Network, variable: &str, state: &str) -> Result<(usize, usize)> {
    let vi = network
        .index_of(variable)
        .ok_or_else(|| Error::UnknownVariable(variable.to_string()))?;
    let si = network
        .variable(vi)
        .state_index(state)
        .ok_or_else(|| Error::UnknownState {
            variable: variable.to_string(),
            state: state.to_string(),
        })?;
    Ok((vi, si))
}
