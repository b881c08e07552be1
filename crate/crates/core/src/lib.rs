//! Ground-truth reconstruction and evaluation of AI screening-mammography
//! scores.
//!
//! The pipeline is `ingest` → `linkage` → `labeler` → `metrics` /
//! `stratify` → `report`; `synth` generates cohorts with a known answer.

#[macro_use]
mod model;

pub mod error;
pub mod ingest;
pub mod labeler;
pub mod linkage;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod stratify;
pub mod synth;

pub use error::{Error, Result};
pub use labeler::{BinaryClass, ExclusionReason, LabeledCohort, LabeledExam, OutcomeLabel};
pub use model::*;
