//! Dense contact annotation: a body vertex touches the scene when it lies
//! close to the scan surface and its normal faces the surface normal.

use std::io::{BufRead, BufReader, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::body::{BodyModel, Region};
use crate::error::{Error, Result};
use crate::fitting::FitResult;
use crate::geometry::io::write_atomic;
use crate::geometry::{Bvh, Mesh, RigidTransform, Vec3};
use crate::par::{self, Execution};

/// Per-vertex binary contact labels, optionally with probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactVector {
    pub topology: String,
    pub labels: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

impl ContactVector {
    pub fn new(topology: impl Into<String>, labels: Vec<bool>) -> Self {
        Self { topology: topology.into(), labels, probabilities: None }
    }

    /// Labels obtained by thresholding the probabilities at 0.5.
    pub fn from_probabilities(topology: impl Into<String>, probabilities: Vec<f64>) -> Result<Self> {
        let v = Self {
            topology: topology.into(),
            labels: probabilities.iter().map(|&p| p >= 0.5).collect(),
            probabilities: Some(probabilities),
        };
        v.validate()?;
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.probabilities {
            if p.len() != self.labels.len() {
                return Err(Error::DimensionMismatch { field: "probabilities", expected: self.labels.len(), actual: p.len() });
            }
            for (v, (&pv, &l)) in p.iter().zip(&self.labels).enumerate() {
                if !(0.0..=1.0).contains(&pv) {
                    return Err(Error::invalid("probabilities", format!("vertex {v}: {pv} outside [0, 1]")));
                }
                if (pv >= 0.5) != l {
                    return Err(Error::invalid("contact labels", format!("vertex {v}: label disagrees with p = {pv}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactConfig {
    /// Distance threshold for foot-sole vertices, metres.
    pub threshold_foot: f64,
    /// Distance threshold for every other vertex, metres.
    pub threshold_body: f64,
    /// Largest angle between the body normal and the reversed scene normal,
    /// degrees. 180 disables the normal test.
    pub normal_max_angle: f64,
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self { threshold_foot: 0.05, threshold_body: 0.025, normal_max_angle: 90.0 }
    }
}

impl ContactConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_foot > 0.0 && self.threshold_body > 0.0) {
            return Err(Error::invalid("contact config", "thresholds must be positive"));
        }
        if !(self.normal_max_angle > 0.0 && self.normal_max_angle <= 180.0) {
            return Err(Error::invalid("contact config", "normal_max_angle must lie in (0, 180]"));
        }
        Ok(())
    }

    pub fn threshold(&self, region: Region) -> f64 {
        match region {
            Region::FootSole => self.threshold_foot,
            _ => self.threshold_body,
        }
    }

    /// The contact rule for one vertex given its closest scene point.
    pub fn is_contact(&self, region: Region, distance: f64, body_normal: &Vec3, scene_normal: &Vec3) -> bool {
        distance < self.threshold(region)
            && (self.normal_max_angle >= 180.0
                || body_normal.dot(&-scene_normal) >= self.normal_max_angle.to_radians().cos())
    }
}

/// Labels every body vertex against the scene. Vertices and normals must
/// already be in scene coordinates.
pub fn annotate_contact(
    topology: &str,
    vertices: &[Vec3],
    normals: &[Vec3],
    regions: &[Region],
    scene: &Bvh,
    cfg: &ContactConfig,
    exec: Execution,
) -> Result<ContactVector> {
    cfg.validate()?;
    if normals.len() != vertices.len() {
        return Err(Error::DimensionMismatch { field: "normals", expected: vertices.len(), actual: normals.len() });
    }
    if regions.len() != vertices.len() {
        return Err(Error::DimensionMismatch { field: "regions", expected: vertices.len(), actual: regions.len() });
    }
    let labels = par::map_range(exec, vertices.len(), |v| {
        let hit = scene.closest_point(&vertices[v]);
        cfg.is_contact(regions[v], hit.distance, &normals[v], &hit.normal)
    });
    Ok(ContactVector::new(topology, labels))
}

/// Poses the body for every fitted frame, moves it into the scene with
/// `align` and annotates contact.
pub fn contact_from_fit(
    fit: &FitResult,
    model: &BodyModel,
    scene: &Bvh,
    align: &RigidTransform,
    cfg: &ContactConfig,
    exec: Execution,
) -> Result<Vec<ContactVector>> {
    fit.frames
        .iter()
        .map(|params| {
            let posed = model.pose_body(params)?;
            let placed: Vec<Vec3> = posed.vertices.iter().map(|v| align.apply(v)).collect();
            let mesh = Mesh::new(placed, model.faces().to_vec())?;
            annotate_contact(
                model.topology_name(),
                mesh.vertices(),
                mesh.vertex_normals(),
                model.regions(),
                scene,
                cfg,
                exec,
            )
        })
        .collect()
}

/// One line of a label file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelRecord {
    pub topology: String,
    pub frame: usize,
    pub labels: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

impl LabelRecord {
    pub fn from_contact(frame: usize, c: &ContactVector) -> Self {
        Self {
            topology: c.topology.clone(),
            frame,
            labels: c.labels.iter().map(|&l| l as u8).collect(),
            probabilities: c.probabilities.clone(),
        }
    }

    pub fn to_contact(&self) -> Result<ContactVector> {
        let labels = self
            .labels
            .iter()
            .map(|&l| match l {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::invalid("contact labels", format!("frame {}: label {other} is not 0 or 1", self.frame))),
            })
            .collect::<Result<Vec<_>>>()?;
        let c = ContactVector { topology: self.topology.clone(), labels, probabilities: self.probabilities.clone() };
        c.validate()?;
        Ok(c)
    }
}

/// Writes one JSON record per frame, frames numbered from 0.
pub fn save_labels(path: &Path, frames: &[ContactVector]) -> Result<()> {
    let mut buf = Vec::new();
    for (t, c) in frames.iter().enumerate() {
        serde_json::to_writer(&mut buf, &LabelRecord::from_contact(t, c))?;
        buf.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    write_atomic(path, &buf)
}

/// Reads a label file; records must be in frame order starting at 0.
pub fn load_labels(path: &Path) -> Result<Vec<ContactVector>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { path: path.to_path_buf(), line: i + 1, message };
        let rec: LabelRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if rec.frame != out.len() {
            return Err(parse_err(format!("expected frame {}, found {}", out.len(), rec.frame)));
        }
        out.push(rec.to_contact().map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(out)
}
