pub mod cli;
pub mod error;
pub mod model;
pub mod oracle;
pub mod presets;
pub mod reporting;
pub mod scalers;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
