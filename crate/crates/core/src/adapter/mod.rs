//! Black-box access to hand pose estimation models.
//!
//! External models run out of process and speak the line protocol in
//! [`protocol`]. The built-in oracle and degrader adapters need no model and
//! read ground truth straight from the test case descriptor.

mod builtin;
mod external;
pub mod protocol;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::builtin::{DegraderAdapter, DegraderConfig, FailureModel, OracleAdapter};
pub use self::external::ExternalAdapter;
use crate::dataset::{BoundingBox, HandLandmarks};
use crate::testgen::TestCaseDescriptor;

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

/// What a model reported for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Prediction {
    Detection {
        bbox: BoundingBox,
        keypoints: HandLandmarks,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        confidence: Option<f64>,
    },
    NoDetection,
}

impl Prediction {
    pub fn is_detection(&self) -> bool {
        matches!(self, Prediction::Detection { .. })
    }
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("failed to launch `{command}`: {source}")]
    Launch {
        command: String,
        #[source]
        source: std::io::Error,
    },

    #[error("adapter did not complete the handshake within {timeout_ms} ms{}", fmt_diag(.diagnostics))]
    HandshakeTimeout { timeout_ms: u64, diagnostics: String },

    #[error("adapter speaks protocol version {found}, expected {expected}{}", fmt_diag(.diagnostics))]
    VersionMismatch {
        expected: u32,
        found: u32,
        diagnostics: String,
    },

    #[error("protocol error: {message}{}", fmt_diag(.diagnostics))]
    Protocol { message: String, diagnostics: String },

    #[error("adapter exited unexpectedly{}", fmt_diag(.diagnostics))]
    Exited { diagnostics: String },

    #[error("request `{id}` timed out after {timeout_ms} ms")]
    Timeout { id: String, timeout_ms: u64 },

    #[error("invalid adapter configuration: {0}")]
    Config(String),
}

fn fmt_diag(d: &str) -> String {
    let d = d.trim();
    if d.is_empty() {
        String::new()
    } else {
        format!("; adapter stderr:\n{d}")
    }
}

/// A model that answers one request at a time.
pub trait Adapter: Send {
    fn model_id(&self) -> &str;

    /// Predicts for `case`, whose image has been written to `image`.
    fn predict(
        &mut self,
        case: &TestCaseDescriptor,
        image: &Path,
    ) -> Result<Prediction, AdapterError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdapterConfig {
    External {
        /// Program followed by its arguments.
        command: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        working_dir: Option<PathBuf>,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
    },
    Oracle,
    Degrader(DegraderConfig),
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_MS
}

impl AdapterConfig {
    pub fn validate(&self) -> Result<(), AdapterError> {
        match self {
            AdapterConfig::External {
                command,
                timeout_ms,
                ..
            } => {
                if command.is_empty() {
                    return Err(AdapterError::Config("external command is empty".into()));
                }
                if *timeout_ms == 0 {
                    return Err(AdapterError::Config("timeout must be positive".into()));
                }
                Ok(())
            }
            AdapterConfig::Oracle => Ok(()),
            AdapterConfig::Degrader(d) => d.validate(),
        }
    }
}

/// Starts an adapter. For external adapters this launches the process and
/// completes the version handshake before returning.
pub fn spawn_adapter(config: &AdapterConfig) -> Result<Box<dyn Adapter>, AdapterError> {
    config.validate()?;
    Ok(match config {
        AdapterConfig::External {
            command,
            working_dir,
            timeout_ms,
        } => Box::new(ExternalAdapter::spawn(
            command,
            working_dir.as_deref(),
            *timeout_ms,
        )?),
        AdapterConfig::Oracle => Box::new(OracleAdapter),
        AdapterConfig::Degrader(d) => Box::new(DegraderAdapter::new(d.clone())?),
    })
}
