//! File formats, run reports and the simulation runner behind the `segsel`
//! command.

pub mod config;
pub mod error;
pub mod io;
pub mod methods;
pub mod report;
pub mod run;
pub mod study;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use report::RunReport;
