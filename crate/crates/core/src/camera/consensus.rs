//! Multiview consensus: every pair of confident views triangulates the joint,
//! the point is reprojected into each remaining view and the reprojection
//! error is accumulated per view. Views that disagree with the majority get
//! small weights.

use serde::{Deserialize, Serialize};

use super::keypoints::KeypointSet;
use super::pinhole::Camera;
use super::triangulate::triangulate_pair;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsensusConfig {
    /// Error scale of `w = exp(-e / tau)`, pixels.
    pub tau: f64,
    /// Detections below this confidence do not take part in triangulation.
    pub min_confidence: f64,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self { tau: 20.0, min_confidence: 0.3 }
    }
}

impl ConsensusConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::invalid("consensus", "tau must be positive"));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::invalid("consensus", "min_confidence must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Per-camera, per-joint weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusWeights {
    /// `weights[camera][joint]`.
    pub weights: Vec<Vec<f64>>,
    /// Mean reprojection error per view, `None` where no triplet applied.
    pub errors: Vec<Vec<Option<f64>>>,
}

impl ConsensusWeights {
    pub fn uniform(cameras: usize, joints: usize) -> Self {
        Self {
            weights: vec![vec![1.0; joints]; cameras],
            errors: vec![vec![None; joints]; cameras],
        }
    }

    pub fn get(&self, camera: usize, joint: usize) -> f64 {
        self.weights[camera][joint]
    }
}

/// Mean triplet reprojection error per view for one joint.
pub fn joint_view_errors(cams: &[Camera], keypoints: &KeypointSet, joint: usize, cfg: &ConsensusConfig) -> Vec<Option<f64>> {
    let n = cams.len();
    let participants: Vec<usize> = (0..n)
        .filter(|&c| {
            let d = keypoints.get(c, joint);
            d.is_observed() && d.confidence >= cfg.min_confidence
        })
        .collect();
    let mut out = vec![None; n];
    if participants.len() < 3 {
        return out;
    }
    for (target, slot) in out.iter_mut().enumerate() {
        let det_c = keypoints.get(target, joint);
        if !det_c.is_observed() {
            continue;
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for (ia, &a) in participants.iter().enumerate() {
            if a == target {
                continue;
            }
            for &b in &participants[ia + 1..] {
                if b == target {
                    continue;
                }
                let Ok(p) = triangulate_pair(
                    &cams[a],
                    &keypoints.get(a, joint).uv,
                    &cams[b],
                    &keypoints.get(b, joint).uv,
                ) else {
                    continue;
                };
                let Ok(uv) = cams[target].project(&p) else {
                    continue;
                };
                sum += (uv - det_c.uv).norm();
                count += 1;
            }
        }
        if count > 0 {
            *slot = Some(sum / count as f64);
        }
    }
    out
}

/// Consensus weights `w = exp(-e / tau)` from the mean triplet error `e`.
/// Joints with fewer than three confident views get weight 1 everywhere.
pub fn consensus_weights(
    cams: &[Camera],
    keypoints: &KeypointSet,
    cfg: &ConsensusConfig,
    exec: Execution,
) -> Result<ConsensusWeights> {
    if keypoints.camera_count() != cams.len() {
        return Err(Error::DimensionMismatch {
            field: "keypoint views",
            expected: cams.len(),
            actual: keypoints.camera_count(),
        });
    }
    let joints = keypoints.joint_count();
    let per_joint = par::map_range(exec, joints, |j| joint_view_errors(cams, keypoints, j, cfg));
    let mut out = ConsensusWeights::uniform(cams.len(), joints);
    for (j, errs) in per_joint.into_iter().enumerate() {
        for (c, e) in errs.into_iter().enumerate() {
            out.errors[c][j] = e;
            if let Some(e) = e {
                out.weights[c][j] = (-e / cfg.tau).exp();
            }
        }
    }
    Ok(out)
}
