//! Metamorphic robustness testing for hand pose estimation models.
//!
//! The crate turns a manifest of annotated hand images into source and
//! follow-up test cases (keypoint occlusion, exposure change, motion blur),
//! queries a model through an [`adapter::Adapter`], scores the answers and
//! decides whether each metamorphic relation holds.

pub mod adapter;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod synthetic;
pub mod testgen;
pub mod transforms;
pub mod verify;

pub use error::{Error, Result};
