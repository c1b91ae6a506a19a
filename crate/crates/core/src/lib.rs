//! Occlusion-robust fall detection toolkit.
//!
//! The pipeline: ingest videos with BODY-25 keypoints ([`corpus`]), synthesize
//! body-part occlusions ([`occlusion`]), cut labeled windows
//! ([`segmentation`]), compute dynamic Haar features ([`haar`]), select
//! features with weighted AdaBoost ([`boosting`]), classify with a weighted
//! linear SVM ([`svm`]), and balance normal against occluded samples while
//! training ([`trainer`]). [`eval`] and [`synth`] hold metrics, diagnostics,
//! benchmarks and a synthetic corpus generator; [`experiment`] and
//! [`config`] wire the stages into reproducible runs.

pub mod boosting;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod exec;
pub mod experiment;
pub mod haar;
pub mod image;
pub mod occlusion;
pub mod rng;
pub mod segmentation;
pub mod svm;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use exec::Execution;
