//! Deterministic discrete-event energy simulator: cooperative scheduler,
//! two-component and radio workload models, a supply-referred current meter
//! (P = αCV²f + static) and the named scenarios.

pub mod energy;
pub mod engine;
pub mod radio;
pub mod scenario;
pub mod workload;

pub use energy::{instantaneous_current, EnergyTrace, TraceSample};
pub use engine::{Engine, StopRule};
pub use radio::radio_model;
pub use scenario::{run_scenario, Report, Scenario, SimOptions};
pub use workload::{synth_benchmark, MemoryClass, MicroOp, WorkKind, WorkloadSpec};
