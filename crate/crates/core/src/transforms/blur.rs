use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::ImageBuffer;
use crate::error::{Error, Result};

pub const DEFAULT_KERNEL_SIZE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlurDirection {
    Horizontal,
    Vertical,
    /// Top-left to bottom-right.
    Diagonal,
}

impl BlurDirection {
    pub const ALL: [BlurDirection; 3] = [
        BlurDirection::Horizontal,
        BlurDirection::Vertical,
        BlurDirection::Diagonal,
    ];
}

impl fmt::Display for BlurDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlurDirection::Horizontal => "horizontal",
            BlurDirection::Vertical => "vertical",
            BlurDirection::Diagonal => "diagonal",
        })
    }
}

/// Square 0/1 correlation kernel with a line of ones through its anchor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionKernel {
    size: usize,
    direction: BlurDirection,
    grid: Vec<u8>,
}

impl MotionKernel {
    pub fn new(size: usize, direction: BlurDirection) -> Result<Self> {
        if size < 1 {
            return Err(Error::Parameter("kernel size must be at least 1".into()));
        }
        let a = size / 2;
        let mut grid = vec![0u8; size * size];
        for i in 0..size {
            let (row, col) = match direction {
                BlurDirection::Horizontal => (a, i),
                BlurDirection::Vertical => (i, a),
                BlurDirection::Diagonal => (i, i),
            };
            grid[row * size + col] = 1;
        }
        Ok(Self {
            size,
            direction,
            grid,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn direction(&self) -> BlurDirection {
        self.direction
    }

    /// `(row, col)` of the filtered point.
    pub fn anchor(&self) -> (usize, usize) {
        (self.size / 2, self.size / 2)
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.grid[row * self.size + col]
    }

    pub fn ones(&self) -> usize {
        self.grid.iter().filter(|&&v| v == 1).count()
    }

    /// `(dy, dx)` offsets of every 1 relative to the anchor, row-major.
    fn taps(&self) -> Vec<(isize, isize)> {
        let (ar, ac) = self.anchor();
        (0..self.size)
            .flat_map(|r| (0..self.size).map(move |c| (r, c)))
            .filter(|&(r, c)| self.get(r, c) == 1)
            .map(|(r, c)| (r as isize - ar as isize, c as isize - ac as isize))
            .collect()
    }
}

pub fn build_motion_kernel(size: usize, direction: BlurDirection) -> Result<MotionKernel> {
    MotionKernel::new(size, direction)
}

/// Sliding-window cross-correlation normalised by the number of ones.
/// Out-of-range reads replicate the nearest edge pixel; the mean is rounded
/// half away from zero using integer arithmetic.
pub fn correlate(image: &ImageBuffer, kernel: &MotionKernel) -> ImageBuffer {
    if image.is_empty() {
        return image.clone();
    }
    let taps = kernel.taps();
    let n = taps.len() as u32;
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    let clamp = |v: isize, len: usize| v.clamp(0, len as isize - 1) as usize;

    let mut data = Vec::with_capacity(image.data().len());
    let mut acc = vec![0u32; ch];
    for y in 0..h {
        for x in 0..w {
            acc.fill(0);
            for &(dy, dx) in &taps {
                let sy = clamp(y as isize + dy, h);
                let sx = clamp(x as isize + dx, w);
                for (a, &v) in acc.iter_mut().zip(image.pixel(sx, sy)) {
                    *a += v as u32;
                }
            }
            data.extend(acc.iter().map(|&s| ((2 * s + n) / (2 * n)) as u8));
        }
    }
    ImageBuffer::new(w, h, ch, data).expect("shape preserved")
}
