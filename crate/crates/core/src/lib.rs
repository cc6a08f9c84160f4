pub mod detectors;
pub mod disagreement;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod learners;
pub mod report;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};
