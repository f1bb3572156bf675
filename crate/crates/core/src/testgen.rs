//! Random networks for property tests, benchmarks and the self-test.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::instantiation::{Event, Evidence};
use crate::network::{Cpt, Network, Variable};

#[derive(Debug, Clone, Copy)]
pub struct RandomNetworkConfig {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub max_parents: usize,
    /// Chance that a variable gets three states instead of two.
    pub multivalued_probability: f64,
    /// CPT entries are drawn from `[min_weight, 1]` before normalisation, so
    /// every entry is strictly positive.
    pub min_weight: f64,
}

impl Default for RandomNetworkConfig {
    fn default() -> Self {
        Self {
            min_nodes: 2,
            max_nodes: 10,
            max_parents: 3,
            multivalued_probability: 0.2,
            min_weight: 0.05,
        }
    }
}

/// A random DAG over `v0, v1, …` where each node draws its parents from the
/// nodes before it.
pub fn random_network<R: Rng + ?Sized>(rng: &mut R, config: &RandomNetworkConfig) -> Network {
    let n = rng.random_range(config.min_nodes..=config.max_nodes);
    let mut variables = Vec::with_capacity(n);
    let mut cpts = Vec::with_capacity(n);
    let mut cards = Vec::with_capacity(n);
    for i in 0..n {
        let card = if rng.random_bool(config.multivalued_probability) {
            3
        } else {
            2
        };
        let states: Vec<String> = (0..card).map(|s| format!("s{s}")).collect();
        let max_parents = config.max_parents.min(i);
        let k = rng.random_range(0..=max_parents);
        let mut parents: Vec<usize> = rand::seq::index::sample(rng, i.max(1), k.min(i)).into_vec();
        parents.sort_unstable();
        let rows: usize = parents.iter().map(|&p| cards[p]).product();
        let table = (0..rows)
            .map(|_| {
                let w: Vec<f64> = (0..card)
                    .map(|_| rng.random_range(config.min_weight..=1.0))
                    .collect();
                let total: f64 = w.iter().sum();
                w.into_iter().map(|x| x / total).collect()
            })
            .collect();
        let name = format!("v{i}");
        variables.push(Variable::new(
            name.clone(),
            states,
            parents.iter().map(|p| format!("v{p}")).collect::<Vec<_>>(),
        ));
        cpts.push(Cpt::new(name, table));
        cards.push(card);
    }
    Network::new(variables, cpts).expect("generated networks are valid")
}

/// Random evidence over up to `max_vars` variables, never touching `exclude`.
pub fn random_evidence<R: Rng + ?Sized>(
    rng: &mut R,
    network: &Network,
    max_vars: usize,
    exclude: &[usize],
) -> Evidence {
    let candidates: Vec<usize> = (0..network.len())
        .filter(|v| !exclude.contains(v))
        .collect();
    let count = rng.random_range(0..=max_vars.min(candidates.len()));
    let mut evidence = Evidence::new();
    for &v in candidates.choose_multiple(rng, count) {
        let var = network.variable(v);
        let state = rng.random_range(0..var.cardinality());
        evidence
            .insert(Event::new(var.name(), var.states()[state].clone()))
            .expect("distinct variables");
    }
    evidence
}

/// A random `variable = state` event on variable `v`.
pub fn random_event<R: Rng + ?Sized>(rng: &mut R, network: &Network, v: usize) -> Event {
    let var = network.variable(v);
    Event::new(
        var.name(),
        var.states()[rng.random_range(0..var.cardinality())].clone(),
    )
}
