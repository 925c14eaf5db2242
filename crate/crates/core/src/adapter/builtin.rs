use std::collections::BTreeMap;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Adapter, AdapterError, Prediction};
use crate::dataset::{tight_bbox, HandLandmarks, Point};
use crate::testgen::{TcId, TestCaseDescriptor};

/// Perfect model: reports the ground truth of every case.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleAdapter;

impl OracleAdapter {
    pub fn prediction(case: &TestCaseDescriptor) -> Prediction {
        Prediction::Detection {
            bbox: tight_bbox(&case.keypoints),
            keypoints: case.keypoints,
            confidence: None,
        }
    }
}

impl Adapter for OracleAdapter {
    fn model_id(&self) -> &str {
        "oracle"
    }

    fn predict(&mut self, case: &TestCaseDescriptor, _: &Path) -> Result<Prediction, AdapterError> {
        Ok(Self::prediction(case))
    }
}

/// Probability that the degrader reports no detection for a test case.
///
/// An entry in `per_tc` wins; otherwise TC1 level `n` fails with
/// probability `min(1, occlusion_coefficient * n)` and every other case
/// never fails.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FailureModel {
    #[serde(default)]
    pub occlusion_coefficient: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_tc: BTreeMap<TcId, f64>,
}

impl FailureModel {
    pub fn probability(&self, tc: TcId) -> f64 {
        if let Some(&p) = self.per_tc.get(&tc) {
            return p;
        }
        match tc {
            TcId::Occlusion(n) => (self.occlusion_coefficient * n as f64).min(1.0),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegraderConfig {
    #[serde(default)]
    pub failure: FailureModel,
    /// Largest keypoint displacement, in pixels.
    #[serde(default)]
    pub noise_px: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_degrader_name")]
    pub model: String,
}

fn default_degrader_name() -> String {
    "degrader".into()
}

impl Default for DegraderConfig {
    fn default() -> Self {
        Self {
            failure: FailureModel::default(),
            noise_px: 0.0,
            seed: 0,
            model: default_degrader_name(),
        }
    }
}

impl DegraderConfig {
    pub fn validate(&self) -> Result<(), AdapterError> {
        let c = self.failure.occlusion_coefficient;
        if !(c.is_finite() && c >= 0.0) {
            return Err(AdapterError::Config(format!(
                "occlusion coefficient must be non-negative, got {c}"
            )));
        }
        for (tc, &p) in &self.failure.per_tc {
            if !(0.0..=1.0).contains(&p) {
                return Err(AdapterError::Config(format!(
                    "failure probability {p} for {tc} outside [0, 1]"
                )));
            }
        }
        if !(self.noise_px.is_finite() && self.noise_px >= 0.0) {
            return Err(AdapterError::Config(format!(
                "noise magnitude must be non-negative, got {}",
                self.noise_px
            )));
        }
        Ok(())
    }
}

/// Synthetic model with configurable detection failures and keypoint noise.
///
/// Randomness is derived from the seed and identifiers only, so the output
/// for a case does not depend on request order or on how cases are split
/// between workers. The failure draw is keyed by the *source* sample: one
/// uniform number per sample is compared against each case's failure
/// probability, so a sample that fails at probability `p` also fails at
/// every `q > p`. Noise is drawn per case in whole half-pixel steps.
#[derive(Debug, Clone)]
pub struct DegraderAdapter {
    config: DegraderConfig,
}

impl DegraderAdapter {
    pub fn new(config: DegraderConfig) -> Result<Self, AdapterError> {
        config.validate()?;
        Ok(Self { config })
    }

    fn rng(&self, stream: &str, id: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.config.seed.to_le_bytes());
        h.update(stream.as_bytes());
        h.update([0]);
        h.update(id.as_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&h.finalize());
        ChaCha8Rng::from_seed(seed)
    }

    /// Uniform draw in `[0, 1)` shared by every case of a source sample.
    pub fn failure_draw(&self, source_id: &str) -> f64 {
        let bits = self.rng("failure", source_id).next_u64() >> 11;
        bits as f64 / (1u64 << 53) as f64
    }

    /// Per-keypoint displacement in half-pixel units; every offset has
    /// Euclidean norm at most `noise_px`.
    pub fn offsets(&self, case_id: &str) -> Vec<(i64, i64)> {
        let reach = (2.0 * self.config.noise_px).floor() as i64;
        if reach == 0 {
            return vec![(0, 0); crate::dataset::NUM_LANDMARKS];
        }
        let mut rng = self.rng("noise", case_id);
        let span = (2 * reach + 1) as u64;
        let mut draw = move || (rng.next_u64() % span) as i64 - reach;
        (0..crate::dataset::NUM_LANDMARKS)
            .map(|_| loop {
                let (dx, dy) = (draw(), draw());
                if dx * dx + dy * dy <= reach * reach {
                    break (dx, dy);
                }
            })
            .collect()
    }

    pub fn prediction(&self, case: &TestCaseDescriptor) -> Prediction {
        let p = self.config.failure.probability(case.tc_id);
        if p > 0.0 && self.failure_draw(&case.source_id) < p {
            return Prediction::NoDetection;
        }
        let offsets = self.offsets(&case.id);
        let mut i = 0;
        let keypoints: HandLandmarks = case.keypoints.map(|pt| {
            let (dx, dy) = offsets[i];
            i += 1;
            Point::new(pt.x + dx as f64 * 0.5, pt.y + dy as f64 * 0.5)
        });
        Prediction::Detection {
            bbox: tight_bbox(&keypoints),
            keypoints,
            confidence: None,
        }
    }
}

impl Adapter for DegraderAdapter {
    fn model_id(&self) -> &str {
        &self.config.model
    }

    fn predict(&mut self, case: &TestCaseDescriptor, _: &Path) -> Result<Prediction, AdapterError> {
        Ok(self.prediction(case))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Category, NUM_LANDMARKS};
    use crate::testgen::{params_for, MrId};
    use crate::transforms::OcclusionArtifact;

    fn case(source: &str, tc: TcId) -> TestCaseDescriptor {
        let pts: Vec<Point> = (0..NUM_LANDMARKS)
            .map(|i| Point::new(50.0 + 4.0 * i as f64, 70.0 + (i % 4) as f64 * 6.0))
            .collect();
        let id = TestCaseDescriptor::case_id(source, tc);
        TestCaseDescriptor {
            image: format!("{id}.png"),
            id,
            tc_id: tc,
            mr_id: tc.mr(),
            source_id: source.into(),
            category: Category::WithoutObject,
            params: params_for(tc, &OcclusionArtifact::default(), 20),
            keypoints: HandLandmarks::from_slice(&pts).unwrap(),
        }
    }

    fn stream(adapter: &mut dyn Adapter) -> Vec<Prediction> {
        (0..6)
            .flat_map(|s| TcId::all().into_iter().map(move |tc| case(&format!("s{s}"), tc)))
            .map(|c| adapter.predict(&c, Path::new("unused")).unwrap())
            .collect()
    }

    fn noisy(seed: u64) -> DegraderConfig {
        DegraderConfig {
            failure: FailureModel {
                occlusion_coefficient: 1.0 / 30.0,
                per_tc: [(TcId::Numbered(9), 0.5)].into_iter().collect(),
            },
            noise_px: 5.0,
            seed,
            ..DegraderConfig::default()
        }
    }

    #[test]
    fn oracle_echoes_ground_truth() {
        let c = case("a", TcId::Numbered(12));
        let Prediction::Detection { bbox, keypoints, .. } = OracleAdapter::prediction(&c) else {
            panic!()
        };
        assert_eq!(keypoints, c.keypoints);
        assert_eq!(bbox, tight_bbox(&c.keypoints));
    }

    #[test]
    fn fixed_seed_replays_identically() {
        let mut a = DegraderAdapter::new(noisy(42)).unwrap();
        let mut b = DegraderAdapter::new(noisy(42)).unwrap();
        assert_eq!(stream(&mut a), stream(&mut b));
        let mut c = DegraderAdapter::new(noisy(43)).unwrap();
        assert_ne!(stream(&mut a), stream(&mut c));
    }

    #[test]
    fn zero_degradation_is_the_oracle() {
        let mut d = DegraderAdapter::new(DegraderConfig::default()).unwrap();
        assert_eq!(stream(&mut d), stream(&mut OracleAdapter));
    }

    #[test]
    fn certain_failure() {
        let cfg = DegraderConfig {
            failure: FailureModel {
                per_tc: [(TcId::Numbered(13), 1.0)].into_iter().collect(),
                ..FailureModel::default()
            },
            ..DegraderConfig::default()
        };
        let d = DegraderAdapter::new(cfg).unwrap();
        for s in 0..50 {
            assert_eq!(d.prediction(&case(&format!("x{s}"), TcId::Numbered(13))), Prediction::NoDetection);
            assert!(d.prediction(&case(&format!("x{s}"), TcId::Numbered(12))).is_detection());
        }
    }

    #[test]
    fn linear_coefficient_reaches_one_at_level_21() {
        let f = FailureModel {
            occlusion_coefficient: 1.0 / 21.0,
            ..FailureModel::default()
        };
        assert_eq!(f.probability(TcId::Occlusion(21)), 1.0);
        assert!((f.probability(TcId::Occlusion(7)) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.probability(TcId::Baseline), 0.0);
        assert_eq!(f.probability(TcId::Numbered(4)), 0.0);
    }

    #[test]
    fn failures_nest_across_levels() {
        let d = DegraderAdapter::new(DegraderConfig {
            failure: FailureModel {
                occlusion_coefficient: 1.0 / 21.0,
                ..FailureModel::default()
            },
            seed: 7,
            ..DegraderConfig::default()
        })
        .unwrap();
        for s in 0..40 {
            let src = format!("n{s}");
            let failed: Vec<bool> = MrId::Mr1
                .test_cases()
                .into_iter()
                .map(|tc| !d.prediction(&case(&src, tc)).is_detection())
                .collect();
            // once a sample fails it keeps failing at every higher level
            assert!(failed.windows(2).all(|w| !w[0] || w[1]), "{src}: {failed:?}");
            assert!(failed[20]);
        }
    }

    #[test]
    fn noise_is_bounded_half_pixel_steps() {
        let d = DegraderAdapter::new(noisy(99)).unwrap();
        for tc in [TcId::Baseline, TcId::Numbered(3), TcId::Numbered(11)] {
            let c = case("q", tc);
            let offsets = d.offsets(&c.id);
            let Prediction::Detection { keypoints, bbox, .. } = d.prediction(&c) else {
                panic!()
            };
            assert_eq!(bbox, tight_bbox(&keypoints));
            for i in 0..NUM_LANDMARKS {
                let (dx, dy) = (keypoints[i].x - c.keypoints[i].x, keypoints[i].y - c.keypoints[i].y);
                assert_eq!((dx, dy), (offsets[i].0 as f64 * 0.5, offsets[i].1 as f64 * 0.5));
                assert!(dx.hypot(dy) <= 5.0);
            }
            assert!(offsets.iter().any(|&o| o != (0, 0)));
        }
    }

    #[test]
    fn probabilities_validated() {
        let mut cfg = DegraderConfig::default();
        cfg.failure.per_tc.insert(TcId::Numbered(2), 1.2);
        assert!(matches!(DegraderAdapter::new(cfg), Err(AdapterError::Config(_))));
        let mut cfg = DegraderConfig::default();
        cfg.failure.occlusion_coefficient = -0.1;
        assert!(DegraderAdapter::new(cfg).is_err());
        let cfg = DegraderConfig {
            noise_px: -1.0,
            ..DegraderConfig::default()
        };
        assert!(DegraderAdapter::new(cfg).is_err());
    }

    #[test]
    fn failure_table_serializes_with_tc_keys() {
        let json = serde_json::to_string(&noisy(1)).unwrap();
        assert!(json.contains("\"TC9\":0.5"));
        let back: DegraderConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, noisy(1));
    }
}
