use serde::{Deserialize, Serialize};

use super::pinhole::Pixel;
use crate::error::{Error, Result};

/// One 2D joint detection; confidence 0 marks a missing detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Detection {
    pub uv: Pixel,
    pub confidence: f64,
}

impl Detection {
    pub fn new(u: f64, v: f64, confidence: f64) -> Self {
        Self { uv: Pixel::new(u, v), confidence }
    }

    pub fn missing() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn is_observed(&self) -> bool {
        self.confidence > 0.0
    }
}

impl From<[f64; 3]> for Detection {
    fn from([u, v, c]: [f64; 3]) -> Self {
        Self::new(u, v, c)
    }
}

impl From<Detection> for [f64; 3] {
    fn from(d: Detection) -> Self {
        [d.uv.x, d.uv.y, d.confidence]
    }
}

/// Detections for one frame, `views[camera][joint]`, camera order matching
/// the rig.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointSet {
    pub views: Vec<Vec<Detection>>,
}

impl KeypointSet {
    pub fn new(views: Vec<Vec<Detection>>) -> Result<Self> {
        let set = Self { views };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let joints = self.joint_count();
        for (c, view) in self.views.iter().enumerate() {
            if view.len() != joints {
                return Err(Error::DimensionMismatch { field: "keypoints", expected: joints, actual: view.len() });
            }
            for (j, d) in view.iter().enumerate() {
                if !(0.0..=1.0).contains(&d.confidence) {
                    return Err(Error::invalid(
                        "keypoints",
                        format!("camera {c} joint {j}: confidence {} outside [0, 1]", d.confidence),
                    ));
                }
                if d.is_observed() && !(d.uv.x.is_finite() && d.uv.y.is_finite()) {
                    return Err(Error::invalid("keypoints", format!("camera {c} joint {j}: non-finite pixel")));
                }
            }
        }
        Ok(())
    }

    pub fn camera_count(&self) -> usize {
        self.views.len()
    }

    pub fn joint_count(&self) -> usize {
        self.views.first().map_or(0, Vec::len)
    }

    pub fn get(&self, camera: usize, joint: usize) -> &Detection {
        &self.views[camera][joint]
    }

    pub fn any_observed(&self) -> bool {
        self.views.iter().flatten().any(Detection::is_observed)
    }
}
