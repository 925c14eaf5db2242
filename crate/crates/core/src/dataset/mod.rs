//! Ground-truth data: landmarks, rasters, manifests and input normalisation.

mod geometry;
mod image;
mod landmarks;
mod manifest;
mod preprocess;

pub use self::geometry::{tight_bbox, BoundingBox};
pub use self::image::ImageBuffer;
pub use self::landmarks::{Finger, HandLandmarks, LandmarkCountError, Point, NUM_LANDMARKS};
pub use self::manifest::{load_manifest, write_manifest, Category, DatasetManifest, ManifestEntry};
pub use self::preprocess::{
    crop_square_patch, resize, SquarePatch, DEFAULT_CROP_SCALE, DEFAULT_IMAGE_SIDE,
};
