//! Greedy min-fill elimination ordering.

use std::collections::BTreeSet;

/// Orders `to_eliminate` by repeatedly picking the variable whose
/// elimination adds the fewest fill edges to the interaction graph induced
/// by `scopes`. Ties go to the smaller neighbourhood, then the lower index.
pub(crate) fn min_fill_order<'a>(
    num_vars: usize,
    scopes: impl IntoIterator<Item = &'a [usize]>,
    to_eliminate: &[usize],
) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); num_vars];
    for scope in scopes {
        for (i, &a) in scope.iter().enumerate() {
            for &b in &scope[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
    }

    let mut remaining: BTreeSet<usize> = to_eliminate.iter().copied().collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let best = *remaining
            .iter()
            .min_by_key(|&&v| (fill_in(&adj, v), adj[v].len(), v))
            .unwrap();
        let neighbours: Vec<usize> = adj[best].iter().copied().collect();
        for (i, &a) in neighbours.iter().enumerate() {
            adj[a].remove(&best);
            for &b in &neighbours[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        adj[best].clear();
        remaining.remove(&best);
        order.push(best);
    }
    order
}

fn fill_in(adj: &[BTreeSet<usize>], v: usize) -> usize {
    let nb: Vec<usize> = adj[v].iter().copied().collect();
    let mut missing = 0;
    for (i, &a) in nb.iter().enumerate() {
        for &b in &nb[i + 1..] {
            if !adj[a].contains(&b) {
                missing += 1;
            }
        }
    }
    missing
}
