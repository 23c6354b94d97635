//! Dependability analyses for small feedforward ReLU networks.
//!
//! The crate bundles four evidence-producing engines around one network model:
//!
//! - [`coverage`]: k-projection scenario coverage and proposal of the next
//!   data point to collect.
//! - [`verification`]: interval and octagon bound propagation with ReLU-phase
//!   branch-and-bound and counterexample search.
//! - [`monitoring`]: per-class BDDs of binarized activation patterns for
//!   runtime out-of-distribution warnings.
//! - [`metrics`]: perturbation loss, FGSM and occlusion sensitivity.
//!
//! [`report`] holds the serializable report record shared by the CLI.

pub mod coverage;
pub mod dataset;
mod error;
pub mod metrics;
pub mod model;
pub mod monitoring;
pub mod report;
pub mod verification;

pub use coverage::{CategorySpace, CoverageLedger, IndicatorConstraint, ScenarioItem};
pub use dataset::Sample;
pub use error::{Error, Result};
pub use metrics::{ImageInput, Perturbation};
pub use model::{argmax, softmax, ActivationTrace, Affine, Layer, Network};
pub use monitoring::{Monitor, MonitorVerdict, Pattern};
pub use report::{AnalysisReport, GsnTag};
pub use verification::{IntervalBox, LinearConstraint, Verdict, VerificationProblem};

/// Version tag carried by every file format.
pub const FORMAT_TAG: &str = "depkit/1";
