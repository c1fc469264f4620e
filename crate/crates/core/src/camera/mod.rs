//! Calibrated cameras and multiview keypoint processing.

pub mod consensus;
pub mod fusion;
pub mod keypoints;
pub mod pinhole;
pub mod triangulate;

pub use consensus::{consensus_weights, ConsensusConfig, ConsensusWeights};
pub use fusion::fuse_pose_estimates;
pub use keypoints::{Detection, KeypointSet};
pub use pinhole::{Camera, Pixel};
pub use triangulate::triangulate_pair;

use crate::error::Result;
use crate::geometry::Vec3;

/// Pinhole projection of a world point.
pub fn project(cam: &Camera, p: &Vec3) -> Result<Pixel> {
    cam.project(p)
}
