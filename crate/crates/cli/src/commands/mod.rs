use depkit_core::AnalysisReport;

mod coverage;
pub mod monitor;
mod robustness;
mod verify;

pub use coverage::{compute, propose};
pub use monitor::{build, check};
pub use robustness::{occlusion, perturb};
pub use verify::verify;

/// Global flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub args: Vec<String>,
    pub seed: u64,
    pub min_coverage: Option<f64>,
}

/// What a subcommand produced.
#[derive(Debug)]
pub struct Outcome {
    pub report: AnalysisReport,
    /// A finding a CI gate should fail on.
    pub finding: bool,
}
