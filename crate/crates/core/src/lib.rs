//! Tuning and sensitivity bounds for discrete belief networks.
//!
//! * [`network`]: the network model, its JSON document format and
//!   co-varying parameter changes.
//! * [`engine`]: exact inference by variable elimination, including the
//!   per-family joint marginals that drive the tuner.
//! * [`tuner`]: every single-parameter change that enforces a posterior
//!   constraint, with its minimal magnitude.
//! * [`bounds`]: closed-form bounds on how far queries can move when a
//!   parameter changes.

pub mod bounds;
pub mod engine;
pub mod error;
mod factor;
pub mod fixtures;
pub mod grammar;
pub mod instantiation;
pub mod network;
pub mod oracle;
mod ordering;
pub mod selfcheck;
pub mod testgen;
pub mod tuner;

pub use bounds::{EnvelopePoint, OddsRatioBudget, QueryInterval};
pub use engine::{family_marginals, joint_prob, posterior, FamilyMarginals};
pub use error::{Error, Result};
pub use instantiation::{Event, Evidence, Instantiation};
pub use network::{Cpt, MetaParameter, MetaParameterRef, Network, ParamLocation, Variable};
pub use oracle::enumerate_joint_oracle;
pub use tuner::{Coefficients, Constraint, ConstraintKind, Recommendation};
