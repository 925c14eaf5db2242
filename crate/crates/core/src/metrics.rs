//! Outcome classification and confusion-matrix summaries.
//!
//! Every test image contains exactly one hand, so there is no true negative:
//! a missing prediction is a false negative and a poor prediction is a
//! false positive.

use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::adapter::Prediction;
use crate::dataset::{tight_bbox, BoundingBox, HandLandmarks};
use crate::testgen::TcId;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
pub const DEFAULT_ED_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Segmentation,
    Localisation,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Segmentation, Task::Localisation];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Segmentation => "segmentation",
            Task::Localisation => "localisation",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "segmentation" => Ok(Task::Segmentation),
            "localisation" => Ok(Task::Localisation),
            _ => Err(format!("unknown task `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "TP")]
    TruePositive,
    #[serde(rename = "FP")]
    FalsePositive,
    #[serde(rename = "FN")]
    FalseNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Segmentation is a true positive when IoU is strictly above this.
    pub iou: f64,
    /// Localisation is a true positive when mean ED is strictly below this,
    /// in annotation units.
    pub ed: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            iou: DEFAULT_IOU_THRESHOLD,
            ed: DEFAULT_ED_THRESHOLD,
        }
    }
}

/// Intersection over union. Two identical zero-area boxes score 1; any
/// other pair with zero union scores 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Mean per-keypoint Euclidean distance.
pub fn mean_ed(pred: &HandLandmarks, gt: &HandLandmarks) -> f64 {
    let total: f64 = pred.iter().zip(gt.iter()).map(|(p, g)| p.distance(g)).sum();
    total / pred.points().len() as f64
}

/// Scores one prediction for both tasks: `(segmentation, localisation)`.
pub fn classify(
    pred: &Prediction,
    gt: &HandLandmarks,
    thresholds: &Thresholds,
) -> (Outcome, Outcome) {
    match pred {
        Prediction::NoDetection => (Outcome::FalseNegative, Outcome::FalseNegative),
        Prediction::Detection {
            bbox, keypoints, ..
        } => {
            let seg = if iou(bbox, &tight_bbox(gt)) > thresholds.iou {
                Outcome::TruePositive
            } else {
                Outcome::FalsePositive
            };
            let loc = if mean_ed(keypoints, gt) < thresholds.ed {
                Outcome::TruePositive
            } else {
                Outcome::FalsePositive
            };
            (seg, loc)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::TruePositive => self.tp += 1,
            Outcome::FalsePositive => self.fp += 1,
            Outcome::FalseNegative => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

pub fn accumulate<I: IntoIterator<Item = Outcome>>(outcomes: I) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for o in outcomes {
        c.record(o);
    }
    c
}

/// Summary for one (model, test case, task) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub model: String,
    pub tc_id: TcId,
    pub task: Task,
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn derive(model: &str, tc_id: TcId, task: Task, counts: ConfusionCounts) -> MetricRecord {
    MetricRecord {
        model: model.to_string(),
        tc_id,
        task,
        counts,
        precision: counts.precision(),
        recall: counts.recall(),
        f1: counts.f1(),
    }
}
