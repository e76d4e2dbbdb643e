//! Daycare matching with siblings.
//!
//! * [`model`]: instances, matchings, feasibility and individual rationality.
//! * [`stability`]: the choice function and the two blocking-coalition tests.
//! * [`algorithms`]: DA, sequential couples, SDA and ESDA with execution traces.
//! * [`solver`]: exhaustive search for stable matchings on small instances.
//! * [`market`]: random markets with Mallows-distributed priorities.
//! * [`diagnostics`]: structure of reference orderings and traces.
//! * [`experiment`]: seeded sweeps over generated markets.

pub mod algorithms;
pub mod diagnostics;
pub mod experiment;
pub mod market;
pub mod model;
pub mod solver;
pub mod stability;

pub use model::{load_instance, ChildIx, DaycareIx, FamilyIx, Instance, Matching, ModelError};
pub use stability::StabilityMode;
