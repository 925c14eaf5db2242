//! Corruptions used to derive follow-up inputs: keypoint occlusion, gamma
//! exposure change and directional motion blur. All of them are pure and
//! leave their inputs untouched.

mod blur;
mod gamma;
mod occlusion;

pub use self::blur::{build_motion_kernel, correlate, BlurDirection, MotionKernel, DEFAULT_KERNEL_SIZE};
pub use self::gamma::{adjust_gamma, GammaParam, MAX_GAMMA};
pub use self::occlusion::{occlude, OcclusionArtifact, DEFAULT_OCCLUSION_RADIUS};
