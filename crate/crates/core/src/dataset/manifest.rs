use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::image::ImageBuffer;
use super::landmarks::HandLandmarks;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    WithObject,
    WithoutObject,
}

/// One manifest entry as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: String,
    image: PathBuf,
    category: Category,
    keypoints: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    /// Resolved path (manifest directory joined with the stored relative path).
    pub image: PathBuf,
    pub category: Category,
    pub landmarks: HandLandmarks,
}

impl ManifestEntry {
    pub fn load_image(&self) -> Result<ImageBuffer> {
        ImageBuffer::load_png(&self.image)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// SHA-256 over the manifest file and every referenced image, hex encoded.
    pub digest: String,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads and validates a manifest. Image paths are resolved against the
/// manifest's directory and every image is decoded once to check it.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let values: Vec<serde_json::Value> =
        serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            entry: None,
            message: e.to_string(),
        })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(values.len());
    for (i, value) in values.into_iter().enumerate() {
        let label = value
            .get("id")
            .and_then(|v| v.as_str())
            .map(|s| format!("#{i} ({s})"))
            .unwrap_or_else(|| format!("#{i}"));
        let raw: RawEntry = serde_json::from_value(value).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            entry: Some(label),
            message: e.to_string(),
        })?;
        // ids become file name stems in generated suites
        if raw.id.is_empty()
            || raw.id.starts_with('.')
            || raw.id.contains(['/', '\\'])
            || raw.id.contains("__")
        {
            return Err(Error::Validation {
                id: raw.id,
                message: "sample id must be a non-empty file-name stem without `/`, `\\`, `__` or a leading `.`".into(),
            });
        }
        if !seen.insert(raw.id.clone()) {
            return Err(Error::Validation {
                id: raw.id,
                message: "duplicate sample id".into(),
            });
        }
        let landmarks = HandLandmarks::from_pairs(&raw.id, &raw.keypoints)?;
        entries.push(ManifestEntry {
            id: raw.id,
            image: base.join(&raw.image),
            category: raw.category,
            landmarks,
        });
    }

    let image_hashes = entries
        .par_iter()
        .map(|e| {
            let data = std::fs::read(&e.image).map_err(|err| Error::io(&e.image, err))?;
            image::load_from_memory_with_format(&data, image::ImageFormat::Png).map_err(
                |err| Error::Image {
                    path: e.image.clone(),
                    message: err.to_string(),
                },
            )?;
            Ok(Sha256::digest(&data))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    for h in &image_hashes {
        hasher.update(h);
    }
    Ok(DatasetManifest {
        entries,
        digest: hex::encode(hasher.finalize()),
    })
}

/// Writes a manifest in the on-disk schema. Image paths are stored relative
/// to the manifest directory when possible.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let raw: Vec<RawEntry> = entries
        .iter()
        .map(|e| RawEntry {
            id: e.id.clone(),
            image: e
                .image
                .strip_prefix(base)
                .map(Path::to_path_buf)
                .unwrap_or_else(|_| e.image.clone()),
            category: e.category,
            keypoints: e.landmarks.to_pairs(),
        })
        .collect();
    let json = serde_json::to_string_pretty(&raw).expect("manifest serializes");
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}
