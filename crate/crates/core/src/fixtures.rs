//! Reference networks used across tests, benches and the CLI self-test.

use crate::network::{Cpt, Network, Variable};

/// The six-variable fire/tampering/alarm network in canonical form.
pub const FIRE_ALARM_DOCUMENT: &str = include_str!("../fixtures/fire_alarm.json");

pub fn fire_alarm() -> Network {
    Network::parse(FIRE_ALARM_DOCUMENT).expect("bundled fixture is valid")
}

/// Two binary roots `x` and `y` and a deterministic child `e` that is
/// `true` exactly when `x` and `y` agree.
pub fn agreement_network(theta_x: f64, theta_y: f64) -> Network {
    let tf = ["true", "false"];
    Network::new(
        vec![
            Variable::new("x", tf, []),
            Variable::new("y", tf, []),
            Variable::new("e", tf, ["x", "y"]),
        ],
        vec![
            Cpt::new("x", vec![vec![theta_x, 1.0 - theta_x]]),
            Cpt::new("y", vec![vec![theta_y, 1.0 - theta_y]]),
            Cpt::new(
                "e",
                vec![
                    vec![1.0, 0.0],
                    vec![0.0, 1.0],
                    vec![0.0, 1.0],
                    vec![1.0, 0.0],
                ],
            ),
        ],
    )
    .expect("valid by construction")
}
