//! Configuration files, binary snapshots, reports and the run driver.

pub mod config;
pub mod driver;
pub mod report;
pub mod snapshot;

pub use config::{load_config, parse_config, ExperimentKind, RunConfig};
pub use driver::{execute, Outcome};
pub use report::{emit_report, Report};
pub use snapshot::{load_state, load_trajectory, save_state, save_trajectory};
