//! Scenario runner, benchmarks and shadow bookkeeping for the shieldpool
//! simulator. The `shieldpool` binary wraps these.

pub mod bench;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod shadow;

pub use runner::{run_scenario, Report, Runner};
pub use scenario::{Scenario, ScenarioError};
