//! Simulation and numerical analysis of the critical evoSI epidemic on
//! configuration-model random graphs.
//!
//! The crate is layered bottom-up:
//!
//! - [`degree`]: degree distributions, moments and closed-form constants
//! - [`graph`]: configuration-model construction
//! - [`epidemic`]: evoSI, avoSI and AB-avoSI simulators
//! - [`walks`]: the upper and lower comparison random walks
//! - [`limit`]: Airy functions, barrier-crossing series and limit constants
//! - [`harness`]: batch experiments, estimates and staged diagnostics

pub mod degree;
pub mod epidemic;
pub mod error;
pub mod graph;
pub mod harness;
pub mod limit;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod walks;

pub use degree::{DegreeModel, DegreeSequence, ModelConstants};
pub use error::{Error, Result};
pub use graph::{HalfEdgePool, MultiGraph};
