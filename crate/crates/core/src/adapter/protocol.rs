//! Newline-delimited JSON messages exchanged with external model processes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdapterError, Prediction};
use crate::dataset::{BoundingBox, HandLandmarks};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        model: Option<String>,
    },
    Predict {
        id: String,
        image: String,
    },
    Result {
        id: String,
        detected: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bbox: Option<[f64; 4]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        keypoints: Option<Vec<[f64; 2]>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        confidence: Option<f64>,
    },
}

impl Message {
    pub fn hello() -> Self {
        Message::Hello {
            version: PROTOCOL_VERSION,
            model: None,
        }
    }

    pub fn predict(id: &str, image: &Path) -> Self {
        Message::Predict {
            id: id.to_string(),
            image: image.to_string_lossy().into_owned(),
        }
    }

    pub fn result(id: &str, prediction: &Prediction) -> Self {
        match prediction {
            Prediction::NoDetection => Message::Result {
                id: id.to_string(),
                detected: false,
                bbox: None,
                keypoints: None,
                confidence: None,
            },
            Prediction::Detection {
                bbox,
                keypoints,
                confidence,
            } => Message::Result {
                id: id.to_string(),
                detected: true,
                bbox: Some((*bbox).into()),
                keypoints: Some(keypoints.to_pairs()),
                confidence: *confidence,
            },
        }
    }

    /// One JSON document terminated by `\n`.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("message serializes");
        s.push('\n');
        s
    }

    pub fn parse(line: &str) -> Result<Self, AdapterError> {
        serde_json::from_str(line.trim_end()).map_err(|e| AdapterError::Protocol {
            message: format!("malformed message `{}`: {e}", line.trim_end()),
            diagnostics: String::new(),
        })
    }
}

/// Validates a `result` message body and turns it into a prediction.
pub fn decode_result(
    id: &str,
    detected: bool,
    bbox: Option<[f64; 4]>,
    keypoints: Option<Vec<[f64; 2]>>,
    confidence: Option<f64>,
) -> Result<Prediction, String> {
    if !detected {
        if bbox.is_some() || keypoints.is_some() || confidence.is_some() {
            return Err(format!("result `{id}` has detected=false but carries geometry"));
        }
        return Ok(Prediction::NoDetection);
    }
    let bbox = bbox.ok_or_else(|| format!("result `{id}` is missing bbox"))?;
    let keypoints = keypoints.ok_or_else(|| format!("result `{id}` is missing keypoints"))?;
    let bbox = BoundingBox::from(bbox);
    if !bbox.is_valid() || bbox.area().is_nan() {
        return Err(format!("result `{id}` has an inverted or non-finite bbox"));
    }
    let keypoints = HandLandmarks::from_pairs(id, &keypoints).map_err(|e| e.to_string())?;
    if keypoints.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(format!("result `{id}` has non-finite keypoints"));
    }
    if let Some(c) = confidence {
        if !(0.0..=1.0).contains(&c) {
            return Err(format!("result `{id}` confidence {c} outside [0, 1]"));
        }
    }
    Ok(Prediction::Detection {
        bbox,
        keypoints,
        confidence,
    })
}
