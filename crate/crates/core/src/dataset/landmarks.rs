use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_LANDMARKS: usize = 21;

/// A 2-D position in pixel coordinates. Sub-pixel values are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// The five fingers, in landmark order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Pinky,
}

impl Finger {
    pub const ALL: [Finger; 5] = [
        Finger::Thumb,
        Finger::Index,
        Finger::Middle,
        Finger::Ring,
        Finger::Pinky,
    ];

    /// Landmark indices of the four joints of this finger, base to tip.
    pub fn indices(self) -> [usize; 4] {
        let first = 1 + 4 * self as usize;
        [first, first + 1, first + 2, first + 3]
    }

    pub fn name(self) -> &'static str {
        match self {
            Finger::Thumb => "thumb",
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Pinky => "pinky",
        }
    }
}

/// The 21 keypoints of one hand.
///
/// Index 0 is the wrist, followed by four joints per finger from thumb to
/// pinky (1-4 thumb, 5-8 index, 9-12 middle, 13-16 ring, 17-20 pinky).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct HandLandmarks([Point; NUM_LANDMARKS]);

impl HandLandmarks {
    pub const WRIST: usize = 0;

    pub fn new(points: [Point; NUM_LANDMARKS]) -> Self {
        Self(points)
    }

    pub fn from_slice(points: &[Point]) -> Result<Self, LandmarkCountError> {
        let arr: [Point; NUM_LANDMARKS] = points
            .try_into()
            .map_err(|_| LandmarkCountError(points.len()))?;
        Ok(Self(arr))
    }

    /// Builds landmarks from raw `[x, y]` pairs, as found in manifests and
    /// wire messages. `id` names the owner in the error.
    pub fn from_pairs(id: &str, pairs: &[[f64; 2]]) -> Result<Self> {
        let points: Vec<Point> = pairs.iter().copied().map(Point::from).collect();
        Self::from_slice(&points).map_err(|e| Error::Validation {
            id: id.to_string(),
            message: e.to_string(),
        })
    }

    pub fn points(&self) -> &[Point; NUM_LANDMARKS] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point> {
        self.0.iter()
    }

    pub fn map(&self, mut f: impl FnMut(Point) -> Point) -> Self {
        Self(self.0.map(&mut f))
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        self.map(|p| Point::new(p.x + dx, p.y + dy))
    }

    pub fn scale(&self, sx: f64, sy: f64) -> Self {
        self.map(|p| Point::new(p.x * sx, p.y * sy))
    }

    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.0.iter().map(|&p| p.into()).collect()
    }
}

impl std::ops::Index<usize> for HandLandmarks {
    type Output = Point;

    fn index(&self, i: usize) -> &Point {
        &self.0[i]
    }
}

impl TryFrom<Vec<Point>> for HandLandmarks {
    type Error = LandmarkCountError;

    fn try_from(v: Vec<Point>) -> Result<Self, Self::Error> {
        Self::from_slice(&v)
    }
}

impl From<HandLandmarks> for Vec<Point> {
    fn from(h: HandLandmarks) -> Self {
        h.0.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("expected {NUM_LANDMARKS} keypoints, found {0}")]
pub struct LandmarkCountError(pub usize);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finger_indices_follow_wrist_first_layout() {
        assert_eq!(Finger::Thumb.indices(), [1, 2, 3, 4]);
        assert_eq!(Finger::Index.indices(), [5, 6, 7, 8]);
        assert_eq!(Finger::Middle.indices(), [9, 10, 11, 12]);
        assert_eq!(Finger::Ring.indices(), [13, 14, 15, 16]);
        assert_eq!(Finger::Pinky.indices(), [17, 18, 19, 20]);
    }

    #[test]
    fn partial_annotation_rejected() {
        let pts = vec![[1.0, 2.0]; 20];
        let err = HandLandmarks::from_pairs("s7", &pts).unwrap_err();
        assert!(err.to_string().contains("s7"));
        assert!(err.to_string().contains("found 20"));
    }

    #[test]
    fn serde_uses_pair_arrays() {
        let h = HandLandmarks::new([Point::new(1.5, 2.0); NUM_LANDMARKS]);
        let s = serde_json::to_string(&h).unwrap();
        assert!(s.starts_with("[[1.5,2.0],"));
        let back: HandLandmarks = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
        assert!(serde_json::from_str::<HandLandmarks>("[[0,0]]").is_err());
    }
}
