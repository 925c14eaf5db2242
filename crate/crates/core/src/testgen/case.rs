use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Category, Finger, HandLandmarks, ImageBuffer, NUM_LANDMARKS};
use crate::error::{Error, Result};
use crate::transforms::{
    adjust_gamma, correlate, occlude, BlurDirection, GammaParam, MotionKernel, OcclusionArtifact,
};

/// Gamma values for TC7..TC10, strong underexposure to strong overexposure.
pub const EXPOSURE_GAMMAS: [f64; 4] = [5.0, 2.0, 0.5, 0.2];

/// Blur directions for TC11..TC13.
pub const BLUR_DIRECTIONS: [BlurDirection; 3] = [
    BlurDirection::Vertical,
    BlurDirection::Horizontal,
    BlurDirection::Diagonal,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MrId {
    #[serde(rename = "MR1")]
    Mr1,
    #[serde(rename = "MR2")]
    Mr2,
    #[serde(rename = "MR3")]
    Mr3,
    #[serde(rename = "MR4")]
    Mr4,
}

impl MrId {
    pub const ALL: [MrId; 4] = [MrId::Mr1, MrId::Mr2, MrId::Mr3, MrId::Mr4];

    /// Follow-up test cases derived under this relation, in canonical order.
    pub fn test_cases(self) -> Vec<TcId> {
        match self {
            MrId::Mr1 => (1..=NUM_LANDMARKS as u8).map(TcId::Occlusion).collect(),
            MrId::Mr2 => (2..=6).map(TcId::Numbered).collect(),
            MrId::Mr3 => (7..=10).map(TcId::Numbered).collect(),
            MrId::Mr4 => (11..=13).map(TcId::Numbered).collect(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MrId::Mr1 => "MR1",
            MrId::Mr2 => "MR2",
            MrId::Mr3 => "MR3",
            MrId::Mr4 => "MR4",
        }
    }
}

impl fmt::Display for MrId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MrId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MR1" => Ok(MrId::Mr1),
            "MR2" => Ok(MrId::Mr2),
            "MR3" => Ok(MrId::Mr3),
            "MR4" => Ok(MrId::Mr4),
            _ => Err(Error::Parameter(format!("unknown metamorphic relation `{s}`"))),
        }
    }
}

/// Test-case identifier. The derived ordering is the canonical report order:
/// baseline, TC1 levels 1..21, then TC2..TC13.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TcId {
    Baseline,
    /// TC1 at the given occlusion level (1..=21).
    Occlusion(u8),
    /// TC2..=TC13.
    Numbered(u8),
}

impl TcId {
    pub fn mr(self) -> Option<MrId> {
        match self {
            TcId::Baseline => None,
            TcId::Occlusion(_) => Some(MrId::Mr1),
            TcId::Numbered(2..=6) => Some(MrId::Mr2),
            TcId::Numbered(7..=10) => Some(MrId::Mr3),
            TcId::Numbered(_) => Some(MrId::Mr4),
        }
    }

    /// Every identifier in canonical order.
    pub fn all() -> Vec<TcId> {
        std::iter::once(TcId::Baseline)
            .chain(MrId::ALL.iter().flat_map(|m| m.test_cases()))
            .collect()
    }

    pub fn occlusion_level(self) -> Option<u8> {
        match self {
            TcId::Occlusion(n) => Some(n),
            _ => None,
        }
    }
}

impl fmt::Display for TcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TcId::Baseline => f.write_str("BASELINE"),
            TcId::Occlusion(n) => write!(f, "TC1_L{n}"),
            TcId::Numbered(n) => write!(f, "TC{n}"),
        }
    }
}

impl FromStr for TcId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("unknown test case id `{s}`"));
        if s == "BASELINE" {
            return Ok(TcId::Baseline);
        }
        if let Some(level) = s.strip_prefix("TC1_L") {
            let n: u8 = level.parse().map_err(|_| bad())?;
            return if (1..=NUM_LANDMARKS as u8).contains(&n) {
                Ok(TcId::Occlusion(n))
            } else {
                Err(bad())
            };
        }
        let n: u8 = s.strip_prefix("TC").ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if (2..=13).contains(&n) {
            Ok(TcId::Numbered(n))
        } else {
            Err(bad())
        }
    }
}

impl Serialize for TcId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TcId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How a follow-up image is derived from its source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformParams {
    None,
    Occlusion {
        indices: Vec<usize>,
        radius: f64,
        color: u8,
    },
    Gamma {
        gamma: GammaParam,
    },
    MotionBlur {
        direction: BlurDirection,
        size: usize,
    },
}

impl TransformParams {
    pub fn apply(&self, image: &ImageBuffer, landmarks: &HandLandmarks) -> Result<ImageBuffer> {
        Ok(match self {
            TransformParams::None => image.clone(),
            TransformParams::Occlusion {
                indices,
                radius,
                color,
            } => {
                if let Some(&bad) = indices.iter().find(|&&i| i >= NUM_LANDMARKS) {
                    return Err(Error::Parameter(format!("landmark index {bad} out of range")));
                }
                occlude(image, landmarks, indices, &OcclusionArtifact::new(*radius, *color)?)
            }
            TransformParams::Gamma { gamma } => adjust_gamma(image, *gamma),
            TransformParams::MotionBlur { direction, size } => {
                correlate(image, &MotionKernel::new(*size, *direction)?)
            }
        })
    }
}

/// Everything needed to reproduce and score one test case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCaseDescriptor {
    /// `<source_id>__<tc_id>`; also the image file stem.
    pub id: String,
    pub tc_id: TcId,
    pub mr_id: Option<MrId>,
    pub source_id: String,
    pub category: Category,
    pub params: TransformParams,
    /// Image path relative to the suite directory.
    pub image: String,
    /// Ground truth, identical to the source sample's.
    pub keypoints: HandLandmarks,
}

impl TestCaseDescriptor {
    pub fn case_id(source_id: &str, tc: TcId) -> String {
        format!("{source_id}__{tc}")
    }
}

/// Transform parameters for a test case under the given artifact and
/// kernel settings.
pub fn params_for(tc: TcId, artifact: &OcclusionArtifact, kernel_size: usize) -> TransformParams {
    let occlusion = |indices: Vec<usize>| TransformParams::Occlusion {
        indices,
        radius: artifact.radius,
        color: artifact.color,
    };
    match tc {
        TcId::Baseline => TransformParams::None,
        TcId::Occlusion(n) => occlusion((0..n as usize).collect()),
        TcId::Numbered(n @ 2..=6) => occlusion(Finger::ALL[n as usize - 2].indices().to_vec()),
        TcId::Numbered(n @ 7..=10) => TransformParams::Gamma {
            gamma: GammaParam::new(EXPOSURE_GAMMAS[n as usize - 7]).expect("canonical gamma"),
        },
        TcId::Numbered(n) => TransformParams::MotionBlur {
            direction: BLUR_DIRECTIONS[n as usize - 11],
            size: kernel_size,
        },
    }
}
