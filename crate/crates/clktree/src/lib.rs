//! Portable clock-tree configuration framework: an abstract clock model, a
//! simulated register backend, virtual platform definitions, a safe
//! multi-phase transition planner, PU-driven DVFS and a discrete-event energy
//! simulator.

pub mod backend;
pub mod configurator;
pub mod dvfs;
pub mod error;
pub mod model;
pub mod platform;
pub mod sim;
pub mod transitions;

pub use error::{Error, Result};
