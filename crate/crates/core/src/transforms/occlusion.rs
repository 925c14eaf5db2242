use serde::{Deserialize, Serialize};

use crate::dataset::{HandLandmarks, ImageBuffer};
use crate::error::{Error, Result};

pub const DEFAULT_OCCLUSION_RADIUS: f64 = 10.0;

/// A solid disc painted over a keypoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcclusionArtifact {
    pub radius: f64,
    /// Value written to every channel.
    pub color: u8,
}

impl OcclusionArtifact {
    pub fn new(radius: f64, color: u8) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Parameter(format!(
                "occlusion radius must be positive, got {radius}"
            )));
        }
        Ok(Self { radius, color })
    }
}

impl Default for OcclusionArtifact {
    fn default() -> Self {
        Self {
            radius: DEFAULT_OCCLUSION_RADIUS,
            color: 0,
        }
    }
}

/// Paints a disc at each selected keypoint. Pixel `(px, py)` is covered when
/// `(px - kx)^2 + (py - ky)^2 <= r^2`; discs are clipped at the borders.
///
/// Panics if an index is not a valid landmark index.
pub fn occlude(
    image: &ImageBuffer,
    landmarks: &HandLandmarks,
    indices: &[usize],
    artifact: &OcclusionArtifact,
) -> ImageBuffer {
    let mut out = image.clone();
    if out.is_empty() {
        return out;
    }
    let r = artifact.radius;
    let r2 = r * r;
    let (w, h) = (out.width() as f64, out.height() as f64);
    for &i in indices {
        let k = landmarks[i];
        let x_lo = (k.x - r).ceil().max(0.0);
        let x_hi = (k.x + r).floor().min(w - 1.0);
        let y_lo = (k.y - r).ceil().max(0.0);
        let y_hi = (k.y + r).floor().min(h - 1.0);
        if x_lo > x_hi || y_lo > y_hi {
            continue;
        }
        for py in y_lo as usize..=y_hi as usize {
            let dy = py as f64 - k.y;
            for px in x_lo as usize..=x_hi as usize {
                let dx = px as f64 - k.x;
                if dx * dx + dy * dy <= r2 {
                    out.pixel_mut(px, py).fill(artifact.color);
                }
            }
        }
    }
    out
}
