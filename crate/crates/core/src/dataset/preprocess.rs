use super::geometry::tight_bbox;
use super::image::ImageBuffer;
use super::landmarks::HandLandmarks;
use crate::error::{Error, Result};

pub const DEFAULT_CROP_SCALE: f64 = 2.2;
pub const DEFAULT_IMAGE_SIDE: usize = 244;

/// Output of [`crop_square_patch`].
#[derive(Debug, Clone, PartialEq)]
pub struct SquarePatch {
    pub image: ImageBuffer,
    pub landmarks: HandLandmarks,
    /// Source pixel that became patch pixel (0, 0).
    pub origin: (i64, i64),
    /// Unrounded patch side, `scale * max(bbox width, bbox height)`.
    pub side: f64,
}

/// Cuts a square patch of side `scale * max(bbox dims)` centred on the
/// landmark bounding box. Pixels falling outside the source are black.
pub fn crop_square_patch(
    image: &ImageBuffer,
    landmarks: &HandLandmarks,
    scale: f64,
) -> Result<SquarePatch> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Parameter(format!("crop scale must be positive, got {scale}")));
    }
    let bbox = tight_bbox(landmarks);
    if bbox.area() <= 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "landmark bounding box {:?} has zero area",
            <[f64; 4]>::from(bbox)
        )));
    }
    let side = scale * bbox.width().max(bbox.height());
    let n = (side.round() as usize).max(1);
    let (cx, cy) = bbox.center();
    let ox = (cx - n as f64 / 2.0).round() as i64;
    let oy = (cy - n as f64 / 2.0).round() as i64;

    let ch = image.channels();
    let mut data = vec![0u8; n * n * ch];
    let (w, h) = (image.width() as i64, image.height() as i64);
    for py in 0..n {
        let sy = oy + py as i64;
        if sy < 0 || sy >= h {
            continue;
        }
        // contiguous run of in-bounds columns
        let x_lo = (-ox).clamp(0, n as i64) as usize;
        let x_hi = (w - ox).clamp(0, n as i64) as usize;
        if x_lo >= x_hi {
            continue;
        }
        let src = image.offset((ox + x_lo as i64) as usize, sy as usize);
        let dst = (py * n + x_lo) * ch;
        let len = (x_hi - x_lo) * ch;
        data[dst..dst + len].copy_from_slice(&image.data()[src..src + len]);
    }

    Ok(SquarePatch {
        image: ImageBuffer::new(n, n, ch, data)?,
        landmarks: landmarks.translate(-(ox as f64), -(oy as f64)),
        origin: (ox, oy),
        side,
    })
}

/// Bilinear resize to `side x side`, sampling at pixel centres with edge
/// clamping. Landmarks are scaled by the same per-axis factors.
pub fn resize(
    image: &ImageBuffer,
    landmarks: &HandLandmarks,
    side: usize,
) -> Result<(ImageBuffer, HandLandmarks)> {
    if image.is_empty() {
        return Err(Error::Parameter("cannot resize an empty image".into()));
    }
    if side == 0 {
        return Err(Error::Parameter("resize side must be at least 1".into()));
    }
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    let sx = w as f64 / side as f64;
    let sy = h as f64 / side as f64;

    let taps = |scale: f64, len: usize| -> Vec<(usize, usize, f64)> {
        (0..side)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(len - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let xt = taps(sx, w);
    let yt = taps(sy, h);

    let mut data = Vec::with_capacity(side * side * ch);
    for &(y0, y1, fy) in &yt {
        for &(x0, x1, fx) in &xt {
            for c in 0..ch {
                let top = image.sample(x0, y0, c) as f64 * (1.0 - fx)
                    + image.sample(x1, y0, c) as f64 * fx;
                let bottom = image.sample(x0, y1, c) as f64 * (1.0 - fx)
                    + image.sample(x1, y1, c) as f64 * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let out = ImageBuffer::new(side, side, ch, data)?;
    let lm = landmarks.scale(side as f64 / w as f64, side as f64 / h as f64);
    Ok((out, lm))
}
