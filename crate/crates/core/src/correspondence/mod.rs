//! Scenario harness: runs the quantum and classical pipelines side by side
//! and reports how far apart they are.

mod experiments;
mod report;
mod scenario;

pub use experiments::*;
pub use report::*;
pub use scenario::*;
