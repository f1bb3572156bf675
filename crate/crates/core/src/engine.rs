//! Exact inference by variable elimination.
//!
//! Besides joint and posterior probabilities the engine computes, for every
//! family `(X, U)`, the joint `Pr(i, x, u)` over all family instantiations.
//! Those tables are what the tuner needs to read off the slope of `Pr(i)` in
//! any meta parameter.

use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::instantiation::{Event, Evidence, Instantiation};
use crate::network::{Network, ParamLocation};
use crate::ordering::min_fill_order;

/// `Pr(i, x, u)` for every family of a network, laid out like the CPTs:
/// `table(v)[row][state]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMarginals {
    tables: Vec<Vec<Vec<f64>>>,
    probability: f64,
}

impl FamilyMarginals {
    pub fn table(&self, variable: usize) -> &[Vec<f64>] {
        &self.tables[variable]
    }

    /// `Pr(i, x, u)` for the family entry at `loc`.
    pub fn get(&self, loc: ParamLocation) -> f64 {
        self.tables[loc.variable][loc.row][loc.state]
    }

    /// `Pr(i, u)`: the row summed over the states of the variable.
    pub fn row_total(&self, variable: usize, row: usize) -> f64 {
        self.tables[variable][row].iter().sum()
    }

    /// `Pr(i)`.
    pub fn probability(&self) -> f64 {
        self.probability
    }
}

/// `Pr(i)`.
pub fn joint_prob(network: &Network, inst: &Instantiation) -> Result<f64> {
    let dense = inst.resolve(network)?;
    Ok(joint_dense(network, &dense))
}

/// `Pr(y | e)`.
pub fn posterior(network: &Network, y: &Event, evidence: &Evidence) -> Result<f64> {
    if evidence.contains(&y.variable) {
        return Err(Error::QueryInEvidence(y.variable.clone()));
    }
    let mut dense = evidence.resolve(network)?;
    let (yv, ys) = y.resolve(network)?;
    let pe = joint_dense(network, &dense);
    if pe <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    dense[yv] = Some(ys);
    Ok(joint_dense(network, &dense) / pe)
}

/// Per-family joint marginals `Pr(i, x, u)`, one elimination run per family.
pub fn family_marginals(network: &Network, inst: &Instantiation) -> Result<FamilyMarginals> {
    let dense = inst.resolve(network)?;
    let factors = reduced_cpt_factors(network, &dense);
    let mut tables = Vec::with_capacity(network.len());
    for var in 0..network.len() {
        tables.push(family_table(network, &dense, &factors, var));
    }
    Ok(FamilyMarginals {
        tables,
        probability: joint_dense(network, &dense),
    })
}

pub(crate) fn joint_dense(network: &Network, dense: &[Option<usize>]) -> f64 {
    let factors = reduced_cpt_factors(network, dense);
    let seeds: Vec<usize> = (0..network.len()).filter(|&v| dense[v].is_some()).collect();
    let relevant = ancestral_set(network, &seeds);
    eliminate(network, &factors, &relevant, &[]).value()
}

fn family_table(
    network: &Network,
    dense: &[Option<usize>],
    factors: &[Factor],
    var: usize,
) -> Vec<Vec<f64>> {
    let parents = network.parent_indices(var);
    let mut seeds: Vec<usize> = (0..network.len()).filter(|&v| dense[v].is_some()).collect();
    seeds.push(var);
    seeds.extend_from_slice(parents);
    let relevant = ancestral_set(network, &seeds);

    let mut keep: Vec<usize> = std::iter::once(var)
        .chain(parents.iter().copied())
        .filter(|&v| dense[v].is_none())
        .collect();
    keep.sort_unstable();
    let joint = eliminate(network, factors, &relevant, &keep);

    let card = network.cardinality(var);
    (0..network.row_count(var))
        .map(|row| {
            let parent_states = network.parent_states_of_row(var, row);
            (0..card)
                .map(|x| {
                    let state_of = |v: usize| {
                        if v == var {
                            x
                        } else {
                            let k = parents.iter().position(|&p| p == v).unwrap();
                            parent_states[k]
                        }
                    };
                    let consistent = std::iter::once(var)
                        .chain(parents.iter().copied())
                        .all(|v| dense[v].is_none_or(|s| s == state_of(v)));
                    if consistent {
                        joint.at(state_of)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// CPT factors with the instantiated variables fixed and dropped.
fn reduced_cpt_factors(network: &Network, dense: &[Option<usize>]) -> Vec<Factor> {
    (0..network.len())
        .map(|var| {
            let mut scope: Vec<usize> = network.parent_indices(var).to_vec();
            scope.push(var);
            scope.sort_unstable();
            let cards: Vec<usize> = scope.iter().map(|&v| network.cardinality(v)).collect();
            let size: usize = cards.iter().product();

            let parents = network.parent_indices(var);
            let cpt = network.cpt(var);
            let mut values = Vec::with_capacity(size);
            let mut states = vec![0usize; scope.len()];
            let mut parent_states = vec![0usize; parents.len()];
            for _ in 0..size {
                let mut own = 0;
                for (k, &v) in scope.iter().enumerate() {
                    if v == var {
                        own = states[k];
                    } else {
                        let pk = parents.iter().position(|&p| p == v).unwrap();
                        parent_states[pk] = states[k];
                    }
                }
                values.push(cpt.row(network.row_index(var, &parent_states))[own]);
                for d in (0..scope.len()).rev() {
                    states[d] += 1;
                    if states[d] < cards[d] {
                        break;
                    }
                    states[d] = 0;
                }
            }

            let mut factor = Factor::new(scope, cards, values);
            for &v in network.parent_indices(var).iter().chain([&var]) {
                if let Some(s) = dense[v] {
                    factor = factor.reduce(v, s);
                }
            }
            factor
        })
        .collect()
}

/// `seeds` plus all their ancestors, as a membership mask. Variables outside
/// the mask are barren: their CPTs sum out to one.
fn ancestral_set(network: &Network, seeds: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; network.len()];
    let mut stack: Vec<usize> = seeds.to_vec();
    while let Some(v) = stack.pop() {
        if !mask[v] {
            mask[v] = true;
            stack.extend_from_slice(network.parent_indices(v));
        }
    }
    mask
}

/// Multiplies the factors of `relevant` variables and sums out every free
/// variable except those in `keep`.
fn eliminate(network: &Network, factors: &[Factor], relevant: &[bool], keep: &[usize]) -> Factor {
    let mut pool: Vec<Factor> = factors
        .iter()
        .enumerate()
        .filter(|(v, _)| relevant[*v])
        .map(|(_, f)| f.clone())
        .collect();

    let mut free: Vec<usize> = Vec::new();
    for f in &pool {
        for &v in f.scope() {
            if !keep.contains(&v) && !free.contains(&v) {
                free.push(v);
            }
        }
    }
    let order = min_fill_order(network.len(), pool.iter().map(Factor::scope), &free);

    for var in order {
        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            pool.into_iter().partition(|f| f.scope().contains(&var));
        pool = rest;
        let combined = touching
            .iter()
            .fold(Factor::scalar(1.0), |acc, f| acc.product(f));
        pool.push(combined.sum_out(var));
    }
    pool.iter()
        .fold(Factor::scalar(1.0), |acc, f| acc.product(f))
}
