//! Prequential evaluation, detection scoring and tuning.

pub mod diagnostic;
pub mod prequential;
pub mod scoring;

pub use diagnostic::{error_decomposition, ErrorDecomposition};
pub use prequential::{run_prequential, DetectionEvent, Monitor, RunOptions, RunOutcome};
pub use scoring::{score_detections, tuning_score, Candidate, Ranked, Score};
