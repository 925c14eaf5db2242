use serde::{Deserialize, Serialize};

use crate::dataset::ImageBuffer;
use crate::error::{Error, Result};

pub const MAX_GAMMA: f64 = 5.5;

/// Exposure exponent, restricted to `(0, 5.5]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct GammaParam(f64);

impl GammaParam {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma <= MAX_GAMMA {
            Ok(Self(gamma))
        } else {
            Err(Error::Parameter(format!(
                "gamma must lie in (0, {MAX_GAMMA}], got {gamma}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Output for every possible input sample.
    pub fn lookup_table(self) -> [u8; 256] {
        std::array::from_fn(|v| {
            let normalized = v as f64 / 255.0;
            (255.0 * normalized.powf(self.0)).round().clamp(0.0, 255.0) as u8
        })
    }
}

impl TryFrom<f64> for GammaParam {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<GammaParam> for f64 {
    fn from(g: GammaParam) -> Self {
        g.0
    }
}

/// Power-law exposure change on samples normalised to `[0, 1]`.
pub fn adjust_gamma(image: &ImageBuffer, gamma: GammaParam) -> ImageBuffer {
    let lut = gamma.lookup_table();
    image.map_samples(|v| lut[v as usize])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(v: f64) -> GammaParam {
        GammaParam::new(v).unwrap()
    }

    #[test]
    fn unit_gamma_is_identity() {
        let data: Vec<u8> = (0..=255).collect();
        let img = ImageBuffer::new(256, 1, 1, data).unwrap();
        assert_eq!(adjust_gamma(&img, g(1.0)), img);
    }

    #[test]
    fn known_values() {
        assert_eq!(g(2.0).lookup_table()[128], 64);
        assert_eq!(g(0.5).lookup_table()[128], 181);
    }

    #[test]
    fn range_is_enforced() {
        for bad in [0.0, -1.0, 5.50001, f64::NAN, f64::INFINITY] {
            assert!(GammaParam::new(bad).is_err(), "{bad}");
        }
        for ok in [5.0, 2.0, 0.5, 0.2, 5.5, 1e-6] {
            assert!(GammaParam::new(ok).is_ok(), "{ok}");
        }
        assert!(serde_json::from_str::<GammaParam>("7.0").is_err());
    }

    #[test]
    fn monotone_with_fixed_endpoints() {
        let gammas = [0.2, 0.5, 1.0, 2.0, 5.0, 5.5];
        let tables: Vec<[u8; 256]> = gammas.iter().map(|&x| g(x).lookup_table()).collect();
        for t in &tables {
            assert_eq!(t[0], 0);
            assert_eq!(t[255], 255);
            assert!(t.windows(2).all(|w| w[0] <= w[1]));
        }
        for v in 0..256 {
            assert!(tables.windows(2).all(|w| w[0][v] >= w[1][v]), "v = {v}");
        }
    }
}
