//! Scenario replay and benchmarks on top of the simulated device.

pub mod catalog;
pub mod replay;
pub mod scenario;
pub mod stability;

pub use catalog::{Catalog, CatalogEntry, CatalogError};
pub use replay::{replay, PickupRecord, ReplayError, RunReport};
pub use scenario::{load_scenario, parse_scenario, EventKind, Scenario, ScenarioError, ScenarioEvent};
pub use stability::{run_stability, summarize, Repetition, StabilityError, StabilityReport, TargetStats};
