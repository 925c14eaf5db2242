//! Synthetic hand datasets for demos and tests.

use std::path::{Path, PathBuf};

use crate::dataset::{
    write_manifest, Category, HandLandmarks, ImageBuffer, ManifestEntry, Point, NUM_LANDMARKS,
};
use crate::error::Result;

/// A plausible open hand in a `side x side` frame: wrist near the bottom,
/// five fingers fanning upwards. `variant` perturbs position and spread.
pub fn synthetic_hand(side: usize, variant: u64) -> HandLandmarks {
    let mut state = variant.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    let mut jitter = move || {
        // xorshift64*
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        (state.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let s = side as f64;
    let wrist = Point::new(s * (0.5 + 0.1 * jitter()), s * (0.8 + 0.05 * jitter()));
    let spread = 0.35 + 0.1 * jitter();
    let mut pts = [wrist; NUM_LANDMARKS];
    for finger in 0..5 {
        let angle = -std::f64::consts::FRAC_PI_2 + (finger as f64 - 2.0) * spread;
        let reach = s * (0.09 + 0.01 * jitter());
        for joint in 0..4 {
            let r = reach * (joint as f64 + 1.5);
            pts[1 + finger * 4 + joint] =
                Point::new(wrist.x + r * angle.cos(), wrist.y + r * angle.sin());
        }
    }
    HandLandmarks::new(pts)
}

/// Skin-toned blobs along the fingers on a textured background.
pub fn render_hand(side: usize, landmarks: &HandLandmarks) -> ImageBuffer {
    let mut data = Vec::with_capacity(side * side * 3);
    for y in 0..side {
        for x in 0..side {
            let near = landmarks
                .iter()
                .map(|p| (p.x - x as f64).hypot(p.y - y as f64))
                .fold(f64::INFINITY, f64::min);
            if near < 9.0 {
                data.extend([224, 172, 140]);
            } else {
                let t = ((x * 7 + y * 13) % 64) as u8;
                data.extend([40 + t, 60 + t / 2, 90 + t]);
            }
        }
    }
    ImageBuffer::new(side, side, 3, data).expect("rgb buffer")
}

/// Writes `n` without-object samples (PNG images plus `manifest.json`) into
/// `dir` and returns the manifest path.
pub fn write_synthetic_dataset(dir: &Path, n: usize, side: usize) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let landmarks = synthetic_hand(side, i as u64);
        let image = dir.join(format!("hand{i:04}.png"));
        render_hand(side, &landmarks).save_png(&image)?;
        entries.push(ManifestEntry {
            id: format!("hand{i:04}"),
            image,
            category: Category::WithoutObject,
            landmarks,
        });
    }
    let path = dir.join("manifest.json");
    write_manifest(&path, &entries)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tight_bbox;

    #[test]
    fn hands_fit_in_frame() {
        for v in 0..50 {
            let h = synthetic_hand(244, v);
            let b = tight_bbox(&h);
            assert!(b.x_min > 0.0 && b.y_min > 0.0 && b.x_max < 244.0 && b.y_max < 244.0, "{v}");
            assert!(b.area() > 0.0);
        }
        assert_ne!(synthetic_hand(244, 0), synthetic_hand(244, 1));
    }
}
