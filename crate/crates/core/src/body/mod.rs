//! Parametric articulated body model.

pub mod file;
pub mod humanoid;
pub mod model;
pub mod topology;

pub use humanoid::make_test_humanoid;
pub use model::{BendJoint, BodyModel, BodyParams, HandJoint, Kinematics, PosedBody, Region, ShapedBody};
pub use topology::{map_contact_labels, TopologyMap};

use crate::error::Result;

/// Posed vertices and joints for `params`.
pub fn pose_body(model: &BodyModel, params: &BodyParams) -> Result<PosedBody> {
    model.pose_body(params)
}
