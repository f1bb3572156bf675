//! Discrete belief networks: the data model, its canonical JSON document
//! format, and parameter changes.
//!
//! A [`Network`] is an immutable value. Changing a parameter through
//! [`Network::apply_change`] returns a new network whose version stamp is one
//! higher; the original is untouched.
//!
//! CPT rows are ordered by parent instantiation with the *last* parent's state
//! index varying fastest, and each row lists one probability per state in the
//! declared state order.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows must sum to one within this tolerance.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    name: String,
    states: Vec<String>,
    parents: Vec<String>,
}

impl Variable {
    pub fn new<S: Into<String>>(
        name: impl Into<String>,
        states: impl IntoIterator<Item = S>,
        parents: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            states: states.into_iter().map(Into::into).collect(),
            parents: parents.into_iter().map(Into::into).collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn parents(&self) -> &[String] {
        &self.parents
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn is_binary(&self) -> bool {
        self.states.len() == 2
    }

    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

/// Conditional probability table of one variable given its parents.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    owner: String,
    rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn new(owner: impl Into<String>, rows: Vec<Vec<f64>>) -> Self {
        Self {
            owner: owner.into(),
            rows,
        }
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.rows[index]
    }
}

/// Position of a meta parameter inside a network: variable index, the
/// distinguished state index and the CPT row (parent instantiation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamLocation {
    pub variable: usize,
    pub state: usize,
    pub row: usize,
}

/// Names a tunable meta parameter `τ` of a binary variable: setting it to `t`
/// sets `θ(state | parents) = t` and the complementary entry to `1 - t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaParameterRef {
    pub variable: String,
    pub state: String,
    #[serde(default)]
    pub parent_instantiation: BTreeMap<String, String>,
}

impl fmt::Display for MetaParameterRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.variable, self.state)?;
        if !self.parent_instantiation.is_empty() {
            let parents: Vec<String> = self
                .parent_instantiation
                .iter()
                .map(|(v, s)| format!("{v}={s}"))
                .collect();
            write!(f, " | {}", parents.join(","))?;
        }
        Ok(())
    }
}

/// An entry of [`Network::list_meta_parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct MetaParameter {
    pub reference: MetaParameterRef,
    pub location: ParamLocation,
    pub tau: f64,
    /// False when `tau` is exactly 0 or 1.
    pub tunable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
    version: u64,
    index: HashMap<String, usize>,
    parent_indices: Vec<Vec<usize>>,
    topological_order: Vec<usize>,
}

impl Network {
    /// Builds and validates a network at version 0. `cpts` must list one
    /// table per variable, in the same order as `variables`.
    pub fn new(variables: Vec<Variable>, cpts: Vec<Cpt>) -> Result<Self> {
        let mut index = HashMap::with_capacity(variables.len());
        for (i, v) in variables.iter().enumerate() {
            if v.name.is_empty() {
                return Err(Error::Validation(format!(
                    "variable #{i} has an empty name"
                )));
            }
            if index.insert(v.name.clone(), i).is_some() {
                return Err(Error::Validation(format!(
                    "variable `{}` is declared twice",
                    v.name
                )));
            }
        }
        if cpts.len() != variables.len() {
            return Err(Error::Validation(format!(
                "{} variables but {} CPTs",
                variables.len(),
                cpts.len()
            )));
        }

        let mut parent_indices = Vec::with_capacity(variables.len());
        for v in &variables {
            if v.states.len() < 2 {
                return Err(Error::Validation(format!(
                    "variable `{}` needs at least two states",
                    v.name
                )));
            }
            for (i, s) in v.states.iter().enumerate() {
                if v.states[..i].contains(s) {
                    return Err(Error::Validation(format!(
                        "variable `{}` declares state `{s}` twice",
                        v.name
                    )));
                }
            }
            let mut parents = Vec::with_capacity(v.parents.len());
            for p in &v.parents {
                let pi = *index.get(p).ok_or_else(|| {
                    Error::Validation(format!("variable `{}` has unknown parent `{p}`", v.name))
                })?;
                if parents.contains(&pi) {
                    return Err(Error::Validation(format!(
                        "variable `{}` lists parent `{p}` twice",
                        v.name
                    )));
                }
                parents.push(pi);
            }
            parent_indices.push(parents);
        }

        let topological_order = topological_order(&variables, &parent_indices)?;

        for (i, (v, cpt)) in variables.iter().zip(&cpts).enumerate() {
            if cpt.owner != v.name {
                return Err(Error::Validation(format!(
                    "CPT #{i} belongs to `{}` but variable #{i} is `{}`",
                    cpt.owner, v.name
                )));
            }
            let expected_rows: usize = parent_indices[i]
                .iter()
                .map(|&p| variables[p].cardinality())
                .product();
            if cpt.rows.len() != expected_rows {
                return Err(Error::Validation(format!(
                    "CPT of `{}` has {} rows, expected {expected_rows}",
                    v.name,
                    cpt.rows.len()
                )));
            }
            for (r, row) in cpt.rows.iter().enumerate() {
                if row.len() != v.cardinality() {
                    return Err(Error::Validation(format!(
                        "CPT of `{}` row {r} has {} entries, expected {}",
                        v.name,
                        row.len(),
                        v.cardinality()
                    )));
                }
                if let Some(bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(Error::Validation(format!(
                        "CPT of `{}` row {r} has entry {bad} outside [0, 1]",
                        v.name
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::Validation(format!(
                        "CPT of `{}` row {r} sums to {sum}, expected 1",
                        v.name
                    )));
                }
            }
        }

        Ok(Self {
            variables,
            cpts,
            version: 0,
            index,
            parent_indices,
            topological_order,
        })
    }

    /// Parses a canonical network document.
    pub fn parse(text: &str) -> Result<Self> {
        let doc: NetworkDocument = serde_json::from_str(text).map_err(|e| Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: strip_position(&e.to_string()),
        })?;
        Self::from_document(doc)
    }

    /// Serializes to the canonical document format.
    pub fn serialize(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.to_document())
            .expect("network documents always serialize");
        text.push('\n');
        text
    }

    pub fn from_document(doc: NetworkDocument) -> Result<Self> {
        let mut variables = Vec::with_capacity(doc.variables.len());
        let mut cpts = Vec::with_capacity(doc.variables.len());
        for v in doc.variables {
            cpts.push(Cpt::new(v.name.clone(), v.cpt));
            variables.push(Variable {
                name: v.name,
                states: v.states,
                parents: v.parents,
            });
        }
        Self::new(variables, cpts)
    }

    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            variables: self
                .variables
                .iter()
                .zip(&self.cpts)
                .map(|(v, c)| VariableDocument {
                    name: v.name.clone(),
                    states: v.states.clone(),
                    parents: v.parents.clone(),
                    cpt: c.rows.clone(),
                })
                .collect(),
        }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variable(&self, index: usize) -> &Variable {
        &self.variables[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, index: usize) -> &Cpt {
        &self.cpts[index]
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Returns a copy stamped with `version`; contents are unchanged.
    pub fn with_version(&self, version: u64) -> Self {
        Self {
            version,
            ..self.clone()
        }
    }

    pub fn parent_indices(&self, index: usize) -> &[usize] {
        &self.parent_indices[index]
    }

    /// Variables ordered so that every parent precedes its children.
    pub fn topological_order(&self) -> &[usize] {
        &self.topological_order
    }

    pub fn cardinality(&self, index: usize) -> usize {
        self.variables[index].cardinality()
    }

    pub fn row_count(&self, index: usize) -> usize {
        self.cpts[index].rows.len()
    }

    /// CPT row of `variable` for the given parent state indices (in parent
    /// declaration order).
    pub fn row_index(&self, variable: usize, parent_states: &[usize]) -> usize {
        debug_assert_eq!(parent_states.len(), self.parent_indices[variable].len());
        self.parent_indices[variable]
            .iter()
            .zip(parent_states)
            .fold(0, |acc, (&p, &s)| acc * self.cardinality(p) + s)
    }

    /// Inverse of [`Network::row_index`].
    pub fn parent_states_of_row(&self, variable: usize, mut row: usize) -> Vec<usize> {
        let parents = &self.parent_indices[variable];
        let mut states = vec![0; parents.len()];
        for (slot, &p) in states.iter_mut().zip(parents).rev() {
            let card = self.cardinality(p);
            *slot = row % card;
            row /= card;
        }
        states
    }

    /// Resolves a meta parameter reference against this network.
    pub fn locate(&self, param: &MetaParameterRef) -> Result<ParamLocation> {
        let variable = self
            .index_of(&param.variable)
            .ok_or_else(|| Error::UnknownVariable(param.variable.clone()))?;
        let v = &self.variables[variable];
        if !v.is_binary() {
            return Err(Error::NotBinary(v.name.clone()));
        }
        let state = v
            .state_index(&param.state)
            .ok_or_else(|| Error::UnknownState {
                variable: v.name.clone(),
                state: param.state.clone(),
            })?;
        if let Some(extra) = param
            .parent_instantiation
            .keys()
            .find(|k| !v.parents.contains(k))
        {
            return Err(Error::BadParentInstantiation {
                variable: v.name.clone(),
                detail: format!("`{extra}` is not a parent"),
            });
        }
        let mut parent_states = Vec::with_capacity(v.parents.len());
        for (&pi, pname) in self.parent_indices[variable].iter().zip(&v.parents) {
            let label = param.parent_instantiation.get(pname).ok_or_else(|| {
                Error::BadParentInstantiation {
                    variable: v.name.clone(),
                    detail: format!("parent `{pname}` is not assigned"),
                }
            })?;
            let s = self.variables[pi]
                .state_index(label)
                .ok_or_else(|| Error::UnknownState {
                    variable: pname.clone(),
                    state: label.clone(),
                })?;
            parent_states.push(s);
        }
        Ok(ParamLocation {
            variable,
            state,
            row: self.row_index(variable, &parent_states),
        })
    }

    /// Builds the reference for a location.
    pub fn reference(&self, loc: ParamLocation) -> MetaParameterRef {
        let v = &self.variables[loc.variable];
        let parent_states = self.parent_states_of_row(loc.variable, loc.row);
        let parent_instantiation = self.parent_indices[loc.variable]
            .iter()
            .zip(parent_states)
            .map(|(&p, s)| {
                let pv = &self.variables[p];
                (pv.name.clone(), pv.states[s].clone())
            })
            .collect();
        MetaParameterRef {
            variable: v.name.clone(),
            state: v.states[loc.state].clone(),
            parent_instantiation,
        }
    }

    /// Human-readable `var=state | parent=state,...` label with parents in
    /// declaration order.
    pub fn label(&self, loc: ParamLocation) -> String {
        let v = &self.variables[loc.variable];
        let mut out = format!("{}={}", v.name, v.states[loc.state]);
        let parents = &self.parent_indices[loc.variable];
        if !parents.is_empty() {
            let states = self.parent_states_of_row(loc.variable, loc.row);
            let parts: Vec<String> = parents
                .iter()
                .zip(states)
                .map(|(&p, s)| {
                    let pv = &self.variables[p];
                    format!("{}={}", pv.name, pv.states[s])
                })
                .collect();
            out.push_str(" | ");
            out.push_str(&parts.join(","));
        }
        out
    }

    /// Current value of the parameter at `loc`.
    pub fn tau(&self, loc: ParamLocation) -> f64 {
        self.cpts[loc.variable].rows[loc.row][loc.state]
    }

    /// One entry per binary variable and parent instantiation, with the first
    /// declared state as the distinguished state. Variables with three or more
    /// states contribute nothing.
    pub fn list_meta_parameters(&self) -> Vec<MetaParameter> {
        let mut out = Vec::new();
        for (variable, v) in self.variables.iter().enumerate() {
            if !v.is_binary() {
                continue;
            }
            for row in 0..self.row_count(variable) {
                let location = ParamLocation {
                    variable,
                    state: 0,
                    row,
                };
                let tau = self.tau(location);
                out.push(MetaParameter {
                    reference: self.reference(location),
                    location,
                    tau,
                    tunable: is_tunable(tau),
                });
            }
        }
        out
    }

    /// Sets the meta parameter to `new_tau`, co-varying the complementary
    /// entry, and returns the next version of the network.
    pub fn apply_change(&self, param: &MetaParameterRef, new_tau: f64) -> Result<Self> {
        let loc = self.locate(param)?;
        self.apply_change_at(loc, new_tau)
    }

    pub fn apply_change_at(&self, loc: ParamLocation, new_tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&new_tau) {
            return Err(Error::OutOfRange {
                value: new_tau,
                expected: "[0, 1]",
            });
        }
        if !self.variables[loc.variable].is_binary() {
            return Err(Error::NotBinary(self.variables[loc.variable].name.clone()));
        }
        if !is_tunable(self.tau(loc)) {
            return Err(Error::NonTunable(self.label(loc)));
        }
        let mut next = self.clone();
        let row = &mut next.cpts[loc.variable].rows[loc.row];
        row[loc.state] = new_tau;
        row[1 - loc.state] = 1.0 - new_tau;
        next.version = self.version + 1;
        Ok(next)
    }
}

/// A parameter can be tuned only while it is strictly inside (0, 1).
pub fn is_tunable(tau: f64) -> bool {
    tau > 0.0 && tau < 1.0
}

fn topological_order(variables: &[Variable], parents: &[Vec<usize>]) -> Result<Vec<usize>> {
    let n = variables.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut children = vec![Vec::new(); n];
    for (child, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(child);
        }
    }
    // Smallest ready index first keeps the order deterministic.
    let mut ready: std::collections::BTreeSet<usize> =
        (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }

    // Every remaining node has a remaining parent, so walking parents from
    // any of them must revisit a node.
    let start = (0..n).find(|&i| indegree[i] > 0).unwrap();
    let mut path = vec![start];
    let mut cur = start;
    loop {
        let next = *parents[cur].iter().find(|&&p| indegree[p] > 0).unwrap();
        if let Some(pos) = path.iter().position(|&x| x == next) {
            let mut cycle: Vec<&str> = path[pos..]
                .iter()
                .rev()
                .map(|&i| variables[i].name.as_str())
                .collect();
            cycle.push(cycle[0]);
            return Err(Error::Validation(format!("cycle: {}", cycle.join(" -> "))));
        }
        path.push(next);
        cur = next;
    }
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}

/// Serde mirror of the canonical document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub variables: Vec<VariableDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDocument {
    pub name: String,
    pub states: Vec<String>,
    pub parents: Vec<String>,
    pub cpt: Vec<Vec<f64>>,
}
