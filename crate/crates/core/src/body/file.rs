//! Structured text (JSON) model files.
//!
//! ```text
//! {
//!   "topology_name": "humanoid-v1",
//!   "template": [[x, y, z], ...],
//!   "faces": [[a, b, c], ...],
//!   "joint_names": ["pelvis", ...],
//!   "parents": [-1, 0, 0, ...],
//!   "regressor": [[joint, vertex, weight], ...],
//!   "skin_weights": [[vertex, joint, weight], ...],
//!   "shape_dirs": [[[dx, dy, dz], ...], ...],      // [B][V]
//!   "regions": ["head", "foot_sole", ...],
//!   "hands": [{"joint": 22, "basis": [[bx, by, bz], ...]}],
//!   "bend_joints": [{"joint": 4, "axis": [-1, 0, 0]}]
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{BendJoint, BodyModel, HandJoint, Region};
use crate::error::{Error, Result};
use crate::geometry::{io::write_atomic, Vec3};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    topology_name: String,
    template: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    joint_names: Vec<String>,
    parents: Vec<i64>,
    regressor: Vec<(usize, usize, f64)>,
    skin_weights: Vec<(usize, usize, f64)>,
    #[serde(default)]
    shape_dirs: Vec<Vec<[f64; 3]>>,
    regions: Vec<Region>,
    #[serde(default)]
    hands: Vec<HandJoint>,
    #[serde(default)]
    bend_joints: Vec<BendJoint>,
}

impl BodyModel {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            topology_name: self.topology_name.clone(),
            template: self.template.iter().map(|v| [v.x, v.y, v.z]).collect(),
            faces: self.faces.clone(),
            joint_names: self.joint_names.clone(),
            parents: self.parents.iter().map(|p| p.map_or(-1, |p| p as i64)).collect(),
            regressor: self
                .regressor
                .iter()
                .enumerate()
                .flat_map(|(j, row)| row.iter().map(move |&(v, w)| (j, v, w)))
                .collect(),
            skin_weights: self
                .skin_weights
                .iter()
                .enumerate()
                .flat_map(|(v, row)| row.iter().map(move |&(j, w)| (v, j, w)))
                .collect(),
            shape_dirs: self
                .shape_dirs
                .iter()
                .map(|d| d.iter().map(|v| [v.x, v.y, v.z]).collect())
                .collect(),
            regions: self.regions.clone(),
            hands: self.hands.clone(),
            bend_joints: self.bend_joints.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        let v = f.template.len();
        let j = f.parents.len();
        let mut regressor = vec![Vec::new(); j];
        for (joint, vertex, w) in f.regressor {
            if joint >= j {
                return Err(Error::IndexOutOfRange { what: "regressor joint", index: joint, len: j });
            }
            regressor[joint].push((vertex, w));
        }
        let mut skin_weights = vec![Vec::new(); v];
        for (vertex, joint, w) in f.skin_weights {
            if vertex >= v {
                return Err(Error::IndexOutOfRange { what: "skin weight vertex", index: vertex, len: v });
            }
            skin_weights[vertex].push((joint, w));
        }
        let parents = f
            .parents
            .iter()
            .map(|&p| if p < 0 { None } else { Some(p as usize) })
            .collect();
        let model = BodyModel {
            topology_name: f.topology_name,
            template: f.template.into_iter().map(Vec3::from).collect(),
            faces: f.faces,
            joint_names: f.joint_names,
            parents,
            regressor,
            skin_weights,
            shape_dirs: f
                .shape_dirs
                .into_iter()
                .map(|d| d.into_iter().map(Vec3::from).collect())
                .collect(),
            regions: f.regions,
            hands: f.hands,
            bend_joints: f.bend_joints,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}
