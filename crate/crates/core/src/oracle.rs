//! Brute-force inference by enumerating complete worlds. Exponential; kept as
//! an independent reference for the elimination engine.

use crate::error::{Error, Result};
use crate::instantiation::Instantiation;
use crate::network::Network;

/// Largest joint state space the oracle will enumerate.
pub const MAX_WORLDS: u128 = 1 << 24;

/// `Pr(i)` by summing the chain-rule product over every complete world
/// consistent with `i`.
pub fn enumerate_joint_oracle(network: &Network, inst: &Instantiation) -> Result<f64> {
    let worlds: u128 = (0..network.len())
        .map(|v| network.cardinality(v) as u128)
        .product();
    if worlds > MAX_WORLDS {
        return Err(Error::StateSpaceTooLarge(worlds));
    }
    let fixed = inst.resolve(network)?;
    let free: Vec<usize> = (0..network.len()).filter(|&v| fixed[v].is_none()).collect();
    let mut world: Vec<usize> = fixed.iter().map(|s| s.unwrap_or(0)).collect();

    let mut total = 0.0;
    loop {
        let mut p = 1.0;
        for v in 0..network.len() {
            let parent_states: Vec<usize> = network
                .parent_indices(v)
                .iter()
                .map(|&u| world[u])
                .collect();
            p *= network.cpt(v).row(network.row_index(v, &parent_states))[world[v]];
        }
        total += p;

        let mut carried = true;
        for &v in free.iter().rev() {
            world[v] += 1;
            if world[v] < network.cardinality(v) {
                carried = false;
                break;
            }
            world[v] = 0;
        }
        if carried {
            return Ok(total);
        }
    }
}
