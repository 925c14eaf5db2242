use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::case::{params_for, MrId, TcId, TestCaseDescriptor};
use crate::dataset::{
    crop_square_patch, resize, Category, DatasetManifest, HandLandmarks, ImageBuffer,
    ManifestEntry, DEFAULT_CROP_SCALE, DEFAULT_IMAGE_SIDE,
};
use crate::error::{Error, Result};
use crate::transforms::{OcclusionArtifact, DEFAULT_KERNEL_SIZE, DEFAULT_OCCLUSION_RADIUS};

pub const SUITE_INDEX_FILE: &str = "suite.json";
const SUITE_FORMAT_VERSION: u32 = 1;

/// Normalisation applied to every manifest image before any transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Preprocess {
    None,
    Resize { side: usize },
    CropResize { scale: f64, side: usize },
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess::Resize {
            side: DEFAULT_IMAGE_SIDE,
        }
    }
}

impl Preprocess {
    pub fn crop(side: usize) -> Self {
        Preprocess::CropResize {
            scale: DEFAULT_CROP_SCALE,
            side,
        }
    }

    pub fn apply(
        &self,
        image: &ImageBuffer,
        landmarks: &HandLandmarks,
    ) -> Result<(ImageBuffer, HandLandmarks)> {
        match *self {
            Preprocess::None => Ok((image.clone(), *landmarks)),
            Preprocess::Resize { side } => resize(image, landmarks, side),
            Preprocess::CropResize { scale, side } => {
                let patch = crop_square_patch(image, landmarks, scale)?;
                resize(&patch.image, &patch.landmarks, side)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub mrs: BTreeSet<MrId>,
    pub occlusion: OcclusionArtifact,
    pub kernel_size: usize,
    pub preprocess: Preprocess,
    /// Derive follow-ups from with-object samples too. Baselines are always
    /// produced for every sample.
    pub followups_for_all_categories: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            mrs: MrId::ALL.into_iter().collect(),
            occlusion: OcclusionArtifact {
                radius: DEFAULT_OCCLUSION_RADIUS,
                color: 0,
            },
            kernel_size: DEFAULT_KERNEL_SIZE,
            preprocess: Preprocess::default(),
            followups_for_all_categories: false,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        OcclusionArtifact::new(self.occlusion.radius, self.occlusion.color)?;
        if self.kernel_size == 0 {
            return Err(Error::Parameter("kernel size must be at least 1".into()));
        }
        match self.preprocess {
            Preprocess::Resize { side: 0 } | Preprocess::CropResize { side: 0, .. } => {
                Err(Error::Parameter("image side must be at least 1".into()))
            }
            Preprocess::CropResize { scale, .. } if scale.is_nan() || scale <= 0.0 => {
                Err(Error::Parameter(format!("crop scale must be positive, got {scale}")))
            }
            _ => Ok(()),
        }
    }

    fn follow_ups(&self, category: Category) -> Vec<TcId> {
        if category == Category::WithObject && !self.followups_for_all_categories {
            return Vec::new();
        }
        self.mrs.iter().flat_map(|m| m.test_cases()).collect()
    }
}

/// A normalised source sample, ready for transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub category: Category,
    pub image: ImageBuffer,
    pub landmarks: HandLandmarks,
}

impl Sample {
    pub fn from_entry(entry: &ManifestEntry, preprocess: &Preprocess) -> Result<Self> {
        let image = entry.load_image()?;
        let (image, landmarks) = preprocess.apply(&image, &entry.landmarks)?;
        Ok(Self {
            id: entry.id.clone(),
            category: entry.category,
            image,
            landmarks,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteCase {
    pub descriptor: TestCaseDescriptor,
    pub image: ImageBuffer,
}

fn make_case(sample: &Sample, tc: TcId, config: &SuiteConfig) -> Result<SuiteCase> {
    let params = params_for(tc, &config.occlusion, config.kernel_size);
    let image = params.apply(&sample.image, &sample.landmarks)?;
    let id = TestCaseDescriptor::case_id(&sample.id, tc);
    Ok(SuiteCase {
        descriptor: TestCaseDescriptor {
            image: format!("{id}.png"),
            id,
            tc_id: tc,
            mr_id: tc.mr(),
            source_id: sample.id.clone(),
            category: sample.category,
            params,
            keypoints: sample.landmarks,
        },
        image,
    })
}

fn make_cases(sample: &Sample, tcs: Vec<TcId>, config: &SuiteConfig) -> Vec<SuiteCase> {
    tcs.into_iter()
        .map(|tc| make_case(sample, tc, config).expect("canonical parameters are valid"))
        .collect()
}

/// TC1: level `n` occludes landmarks `0..n`.
pub fn gen_tc1(sample: &Sample, config: &SuiteConfig) -> Vec<SuiteCase> {
    make_cases(sample, MrId::Mr1.test_cases(), config)
}

/// TC2..TC6: one finger (four joints) occluded each.
pub fn gen_finger_tcs(sample: &Sample, config: &SuiteConfig) -> Vec<SuiteCase> {
    make_cases(sample, MrId::Mr2.test_cases(), config)
}

/// TC7..TC10: gamma 5, 2, 0.5, 0.2.
pub fn gen_exposure_tcs(sample: &Sample, config: &SuiteConfig) -> Vec<SuiteCase> {
    make_cases(sample, MrId::Mr3.test_cases(), config)
}

/// TC11..TC13: vertical, horizontal and diagonal motion blur.
pub fn gen_blur_tcs(sample: &Sample, config: &SuiteConfig) -> Vec<SuiteCase> {
    make_cases(sample, MrId::Mr4.test_cases(), config)
}

/// Baseline plus every selected follow-up for one sample, canonical order.
pub fn sample_cases(sample: &Sample, config: &SuiteConfig) -> Vec<SuiteCase> {
    let mut tcs = vec![TcId::Baseline];
    tcs.extend(config.follow_ups(sample.category));
    make_cases(sample, tcs, config)
}

/// In-memory suite; see [`materialize_suite`] for large manifests.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSuite {
    pub config: SuiteConfig,
    pub manifest_digest: String,
    pub cases: Vec<SuiteCase>,
}

pub fn build_suite(manifest: &DatasetManifest, config: &SuiteConfig) -> Result<TestSuite> {
    config.validate()?;
    if manifest.is_empty() {
        return Err(Error::InsufficientData("manifest has no entries".into()));
    }
    let per_sample = manifest
        .entries
        .par_iter()
        .map(|e| Ok(sample_cases(&Sample::from_entry(e, &config.preprocess)?, config)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TestSuite {
        config: config.clone(),
        manifest_digest: manifest.digest.clone(),
        cases: per_sample.into_iter().flatten().collect(),
    })
}

/// The on-disk `suite.json` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteIndex {
    pub format_version: u32,
    pub config: SuiteConfig,
    pub manifest_digest: String,
    pub cases: Vec<TestCaseDescriptor>,
}

impl SuiteIndex {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SUITE_INDEX_FILE);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let index: SuiteIndex = serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
            path: path.clone(),
            entry: None,
            message: e.to_string(),
        })?;
        if index.format_version != SUITE_FORMAT_VERSION {
            return Err(Error::Parse {
                path,
                entry: None,
                message: format!("unsupported suite format {}", index.format_version),
            });
        }
        Ok(index)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(SUITE_INDEX_FILE);
        let json = serde_json::to_string_pretty(self).expect("suite index serializes");
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }
}

/// A suite index together with the directory it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterializedSuite {
    pub root: PathBuf,
    pub index: SuiteIndex,
}

impl MaterializedSuite {
    pub fn open(dir: &Path) -> Result<Self> {
        let root = std::fs::canonicalize(dir).map_err(|e| Error::io(dir, e))?;
        let index = SuiteIndex::load(&root)?;
        Ok(Self { root, index })
    }

    pub fn cases(&self) -> &[TestCaseDescriptor] {
        &self.index.cases
    }

    pub fn image_path(&self, case: &TestCaseDescriptor) -> PathBuf {
        self.root.join(&case.image)
    }
}

/// Generates the suite straight to disk: one PNG per case plus `suite.json`.
/// Samples are processed on the current rayon pool; the index is assembled
/// in manifest order.
pub fn materialize_suite(
    manifest: &DatasetManifest,
    config: &SuiteConfig,
    dir: &Path,
) -> Result<MaterializedSuite> {
    config.validate()?;
    if manifest.is_empty() {
        return Err(Error::InsufficientData("manifest has no entries".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let per_sample = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let sample = Sample::from_entry(entry, &config.preprocess)?;
            sample_cases(&sample, config)
                .into_iter()
                .map(|case| {
                    case.image.save_png(&dir.join(&case.descriptor.image))?;
                    Ok(case.descriptor)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let index = SuiteIndex {
        format_version: SUITE_FORMAT_VERSION,
        config: config.clone(),
        manifest_digest: manifest.digest.clone(),
        cases: per_sample.into_iter().flatten().collect(),
    };
    index.write(dir)?;
    MaterializedSuite::open(dir)
}

/// Reuses the suite in `dir` when it was generated from the same manifest
/// with the same configuration and all its images are present; regenerates
/// it otherwise.
pub fn materialize_or_reuse(
    manifest: &DatasetManifest,
    config: &SuiteConfig,
    dir: &Path,
) -> Result<(MaterializedSuite, bool)> {
    if let Ok(existing) = MaterializedSuite::open(dir) {
        let same = existing.index.config == *config
            && existing.index.manifest_digest == manifest.digest
            && existing.cases().iter().all(|c| existing.image_path(c).is_file());
        if same {
            return Ok((existing, true));
        }
    }
    Ok((materialize_suite(manifest, config, dir)?, false))
}
