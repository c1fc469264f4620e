use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Vec3};
use crate::rotation;

const ROW_SUM_TOL: f64 = 1e-6;
const MAX_INFLUENCES: usize = 4;

/// Per-vertex surface region tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Head,
    Torso,
    Pelvis,
    UpperArm,
    Forearm,
    Hand,
    Thigh,
    Shin,
    Foot,
    FootSole,
}

/// A hand joint whose rotation is offset by `basis · z_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandJoint {
    pub joint: usize,
    /// 3 × k basis, stored as k column vectors.
    pub basis: Vec<[f64; 3]>,
}

impl HandJoint {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn offset(&self, z: &[f64]) -> Vec3 {
        self.basis
            .iter()
            .zip(z)
            .map(|(b, &zi)| Vec3::from(*b) * zi)
            .sum()
    }
}

/// Elbow or knee. The signed flexion angle is `θ_joint · axis`; positive
/// values bend the limb the natural way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BendJoint {
    pub joint: usize,
    pub axis: [f64; 3],
}

/// Articulated body: template surface, kinematic tree, joint regressor,
/// skinning weights, linear shape blendshapes and region labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyModel {
    pub(crate) topology_name: String,
    pub(crate) template: Vec<Vec3>,
    pub(crate) faces: Vec<[usize; 3]>,
    pub(crate) joint_names: Vec<String>,
    pub(crate) parents: Vec<Option<usize>>,
    /// Per joint: `(vertex, weight)`.
    pub(crate) regressor: Vec<Vec<(usize, f64)>>,
    /// Per vertex: `(joint, weight)`.
    pub(crate) skin_weights: Vec<Vec<(usize, f64)>>,
    /// `[B][V]` offsets per unit shape coefficient.
    pub(crate) shape_dirs: Vec<Vec<Vec3>>,
    pub(crate) regions: Vec<Region>,
    pub(crate) hands: Vec<HandJoint>,
    pub(crate) bend_joints: Vec<BendJoint>,
}

impl BodyModel {
    pub fn topology_name(&self) -> &str {
        &self.topology_name
    }

    pub fn template(&self) -> &[Vec3] {
        &self.template
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.template.len()
    }

    pub fn joint_count(&self) -> usize {
        self.parents.len()
    }

    pub fn shape_count(&self) -> usize {
        self.shape_dirs.len()
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn hands(&self) -> &[HandJoint] {
        &self.hands
    }

    pub fn bend_joints(&self) -> &[BendJoint] {
        &self.bend_joints
    }

    pub fn regressor(&self) -> &[Vec<(usize, f64)>] {
        &self.regressor
    }

    pub fn skin_weights(&self) -> &[Vec<(usize, f64)>] {
        &self.skin_weights
    }

    pub fn shape_dirs(&self) -> &[Vec<Vec3>] {
        &self.shape_dirs
    }

    /// `(parent, child)` joint pairs.
    pub fn bones(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .filter_map(|(c, p)| p.map(|p| (p, c)))
            .collect()
    }

    pub fn is_hand_joint(&self, joint: usize) -> bool {
        self.hands.iter().any(|h| h.joint == joint)
    }

    pub fn hand_dims(&self) -> Vec<usize> {
        self.hands.iter().map(HandJoint::dim).collect()
    }

    /// Length of the flat parameter vector `[translation | pose | hands]`.
    pub fn flat_len(&self) -> usize {
        3 + 3 * self.joint_count() + self.hand_dims().iter().sum::<usize>()
    }

    pub fn zero_params(&self) -> BodyParams {
        BodyParams {
            translation: Vec3::zeros(),
            pose: vec![Vec3::zeros(); self.joint_count()],
            shape: vec![0.0; self.shape_count()],
            hand_pose: self.hand_dims().into_iter().map(|d| vec![0.0; d]).collect(),
        }
    }

    pub fn template_mesh(&self) -> Result<Mesh> {
        Mesh::new(self.template.clone(), self.faces.clone())
    }

    /// Checks every structural invariant of the model.
    pub fn validate(&self) -> Result<()> {
        let v = self.vertex_count();
        let j = self.joint_count();
        if v == 0 || j == 0 {
            return Err(Error::invalid("body model", "no vertices or joints"));
        }
        for f in &self.faces {
            if let Some(&i) = f.iter().find(|&&i| i >= v) {
                return Err(Error::IndexOutOfRange { what: "face vertex", index: i, len: v });
            }
        }
        if self.joint_names.len() != j {
            return Err(Error::DimensionMismatch { field: "joint_names", expected: j, actual: self.joint_names.len() });
        }
        if self.parents[0].is_some() {
            return Err(Error::invalid("body model", "joint 0 must be the root"));
        }
        for (k, p) in self.parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < k => {}
                _ => {
                    return Err(Error::invalid(
                        "body model",
                        format!("joint {k} must have a parent with a smaller index"),
                    ))
                }
            }
        }
        if self.regressor.len() != j {
            return Err(Error::DimensionMismatch { field: "regressor", expected: j, actual: self.regressor.len() });
        }
        for (k, row) in self.regressor.iter().enumerate() {
            check_row("regressor", k, row, v)?;
        }
        if self.skin_weights.len() != v {
            return Err(Error::DimensionMismatch { field: "skin_weights", expected: v, actual: self.skin_weights.len() });
        }
        for (k, row) in self.skin_weights.iter().enumerate() {
            check_row("skin_weights", k, row, j)?;
            if row.iter().filter(|(_, w)| *w != 0.0).count() > MAX_INFLUENCES {
                return Err(Error::invalid("skin_weights", format!("vertex {k} has more than {MAX_INFLUENCES} influences")));
            }
        }
        for dirs in &self.shape_dirs {
            if dirs.len() != v {
                return Err(Error::DimensionMismatch { field: "shape_dirs", expected: v, actual: dirs.len() });
            }
        }
        if self.regions.len() != v {
            return Err(Error::DimensionMismatch { field: "regions", expected: v, actual: self.regions.len() });
        }
        for h in &self.hands {
            if h.joint >= j {
                return Err(Error::IndexOutOfRange { what: "hand joint", index: h.joint, len: j });
            }
        }
        for b in &self.bend_joints {
            if b.joint >= j {
                return Err(Error::IndexOutOfRange { what: "bend joint", index: b.joint, len: j });
            }
        }
        Ok(())
    }

    /// Whether the FOOT_SOLE region is present, required for contact
    /// annotation.
    pub fn has_foot_sole(&self) -> bool {
        self.regions.contains(&Region::FootSole)
    }

    pub fn check_params(&self, params: &BodyParams) -> Result<()> {
        if params.pose.len() != self.joint_count() {
            return Err(Error::DimensionMismatch { field: "pose", expected: self.joint_count(), actual: params.pose.len() });
        }
        if params.shape.len() != self.shape_count() {
            return Err(Error::DimensionMismatch { field: "shape", expected: self.shape_count(), actual: params.shape.len() });
        }
        if params.hand_pose.len() != self.hands.len() {
            return Err(Error::DimensionMismatch { field: "hand_pose", expected: self.hands.len(), actual: params.hand_pose.len() });
        }
        for (h, z) in self.hands.iter().zip(&params.hand_pose) {
            if z.len() != h.dim() {
                return Err(Error::DimensionMismatch { field: "hand_pose", expected: h.dim(), actual: z.len() });
            }
        }
        if !params.is_finite() {
            return Err(Error::invalid("body params", "non-finite entry"));
        }
        Ok(())
    }

    /// Template plus shape offsets, and the joints regressed from it.
    pub fn shaped(&self, shape: &[f64]) -> Result<ShapedBody> {
        if shape.len() != self.shape_count() {
            return Err(Error::DimensionMismatch { field: "shape", expected: self.shape_count(), actual: shape.len() });
        }
        let mut vertices = self.template.clone();
        for (dirs, &beta) in self.shape_dirs.iter().zip(shape) {
            if beta == 0.0 {
                continue;
            }
            for (v, d) in vertices.iter_mut().zip(dirs) {
                *v += d * beta;
            }
        }
        let joints = self
            .regressor
            .iter()
            .map(|row| row.iter().map(|&(v, w)| vertices[v] * w).sum())
            .collect();
        Ok(ShapedBody { vertices, joints })
    }

    /// Effective local axis-angle of every joint, hand offsets included.
    fn effective_pose(&self, params: &BodyParams) -> Vec<Vec3> {
        let mut pose = params.pose.clone();
        for (h, z) in self.hands.iter().zip(&params.hand_pose) {
            pose[h.joint] += h.offset(z);
        }
        pose
    }

    /// World rotations and positions of the joints (without global
    /// translation).
    pub fn forward_kinematics(&self, rest_joints: &[Vec3], params: &BodyParams) -> Kinematics {
        let pose = self.effective_pose(params);
        let n = self.joint_count();
        let mut local = Vec::with_capacity(n);
        let mut world_rot: Vec<Matrix3<f64>> = Vec::with_capacity(n);
        let mut world_pos: Vec<Vec3> = Vec::with_capacity(n);
        for k in 0..n {
            let r = rotation::exp(&pose[k]);
            local.push(r);
            match self.parents[k] {
                None => {
                    world_rot.push(r);
                    world_pos.push(rest_joints[k]);
                }
                Some(p) => {
                    let pos = world_pos[p] + world_rot[p] * (rest_joints[k] - rest_joints[p]);
                    world_rot.push(world_rot[p] * r);
                    world_pos.push(pos);
                }
            }
        }
        Kinematics {
            effective_pose: pose,
            local,
            world_rot,
            world_pos,
        }
    }

    /// Shape, regress, pose along the tree, skin, translate.
    pub fn pose_body(&self, params: &BodyParams) -> Result<PosedBody> {
        self.check_params(params)?;
        let shaped = self.shaped(&params.shape)?;
        Ok(self.pose_shaped(&shaped, params))
    }

    /// [`pose_body`](Self::pose_body) with a precomputed shaped template.
    pub fn pose_shaped(&self, shaped: &ShapedBody, params: &BodyParams) -> PosedBody {
        let kin = self.forward_kinematics(&shaped.joints, params);
        let t = params.translation;
        let vertices = shaped
            .vertices
            .iter()
            .zip(&self.skin_weights)
            .map(|(x, row)| {
                row.iter()
                    .map(|&(k, w)| (kin.world_rot[k] * (x - shaped.joints[k]) + kin.world_pos[k]) * w)
                    .sum::<Vec3>()
                    + t
            })
            .collect();
        let joints = kin.world_pos.iter().map(|p| p + t).collect();
        PosedBody { vertices, joints }
    }

    /// Posed joints only (cheaper than skinning every vertex).
    pub fn posed_joints(&self, shaped: &ShapedBody, params: &BodyParams) -> Vec<Vec3> {
        let kin = self.forward_kinematics(&shaped.joints, params);
        kin.world_pos.iter().map(|p| p + params.translation).collect()
    }

    /// Posed joints and their Jacobian `(3J × flat_len)` with respect to the
    /// flat parameter vector `[translation | pose | hands]`.
    pub fn posed_joints_jacobian(
        &self,
        shaped: &ShapedBody,
        params: &BodyParams,
    ) -> (Vec<Vec3>, DMatrix<f64>) {
        let kin = self.forward_kinematics(&shaped.joints, params);
        let n = self.joint_count();
        let cols = self.flat_len();
        let mut jac = DMatrix::zeros(3 * n, cols);

        // A[m][i] = W_parent(m) · dR_m/dθ_i · W_mᵀ, so that
        // dP_k/dθ_{m,i} = A[m][i] · (P_k - P_m) for every strict descendant k.
        let mut a: Vec<[Matrix3<f64>; 3]> = Vec::with_capacity(n);
        for m in 0..n {
            let (_, d) = rotation::exp_derivatives(&kin.effective_pose[m]);
            let wp = self.parents[m].map_or_else(Matrix3::identity, |p| kin.world_rot[p]);
            let wm_t = kin.world_rot[m].transpose();
            a.push([wp * d[0] * wm_t, wp * d[1] * wm_t, wp * d[2] * wm_t]);
        }
        // hand column offsets
        let mut hand_col = Vec::with_capacity(self.hands.len());
        let mut col = 3 + 3 * n;
        for h in &self.hands {
            hand_col.push(col);
            col += h.dim();
        }

        for k in 0..n {
            for r in 0..3 {
                jac[(3 * k + r, r)] = 1.0;
            }
            let mut m_opt = self.parents[k];
            while let Some(m) = m_opt {
                let rel = kin.world_pos[k] - kin.world_pos[m];
                let mut dtheta = [Vec3::zeros(); 3];
                for i in 0..3 {
                    dtheta[i] = a[m][i] * rel;
                    for r in 0..3 {
                        jac[(3 * k + r, 3 + 3 * m + i)] = dtheta[i][r];
                    }
                }
                if let Some(hi) = self.hands.iter().position(|h| h.joint == m) {
                    for (c, b) in self.hands[hi].basis.iter().enumerate() {
                        let d = dtheta[0] * b[0] + dtheta[1] * b[1] + dtheta[2] * b[2];
                        for r in 0..3 {
                            jac[(3 * k + r, hand_col[hi] + c)] = d[r];
                        }
                    }
                }
                m_opt = self.parents[m];
            }
        }
        let joints = kin.world_pos.iter().map(|p| p + params.translation).collect();
        (joints, jac)
    }

    /// Signed flexion angle of a bend joint (positive is natural flexion).
    pub fn flexion_angle(&self, bend: &BendJoint, params: &BodyParams) -> f64 {
        params.pose[bend.joint].dot(&Vec3::from(bend.axis))
    }
}

fn check_row(field: &'static str, row_index: usize, row: &[(usize, f64)], len: usize) -> Result<()> {
    let mut sum = 0.0;
    for &(i, w) in row {
        if i >= len {
            return Err(Error::IndexOutOfRange { what: field, index: i, len });
        }
        if !w.is_finite() || w < 0.0 {
            return Err(Error::invalid(field, format!("row {row_index} has invalid weight {w}")));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::invalid(field, format!("row {row_index} sums to {sum}, expected 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapedBody {
    pub vertices: Vec<Vec3>,
    pub joints: Vec<Vec3>,
}

#[derive(Debug, Clone)]
pub struct Kinematics {
    pub effective_pose: Vec<Vec3>,
    pub local: Vec<Matrix3<f64>>,
    pub world_rot: Vec<Matrix3<f64>>,
    /// Joint positions without the global translation.
    pub world_pos: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosedBody {
    pub vertices: Vec<Vec3>,
    pub joints: Vec<Vec3>,
}

/// Pose, shape, translation and hand coefficients of one body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    #[serde(with = "vec3_serde")]
    pub translation: Vec3,
    /// Axis-angle per joint; entry 0 is the global orientation.
    #[serde(with = "vec3_list_serde")]
    pub pose: Vec<Vec3>,
    pub shape: Vec<f64>,
    #[serde(default)]
    pub hand_pose: Vec<Vec<f64>>,
}

impl BodyParams {
    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|c| c.is_finite())
            && self.pose.iter().flat_map(|p| p.iter()).all(|c| c.is_finite())
            && self.shape.iter().all(|c| c.is_finite())
            && self.hand_pose.iter().flatten().all(|c| c.is_finite())
    }

    /// `[translation | pose | hands]`.
    pub fn to_flat(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(3 + 3 * self.pose.len());
        v.extend(self.translation.iter());
        for p in &self.pose {
            v.extend(p.iter());
        }
        for z in &self.hand_pose {
            v.extend(z.iter());
        }
        DVector::from_vec(v)
    }

    /// Inverse of [`to_flat`](Self::to_flat); shape and layout come from
    /// `self`.
    pub fn with_flat(&self, flat: &DVector<f64>) -> BodyParams {
        let mut out = self.clone();
        out.translation = Vec3::new(flat[0], flat[1], flat[2]);
        for (k, p) in out.pose.iter_mut().enumerate() {
            *p = Vec3::new(flat[3 + 3 * k], flat[4 + 3 * k], flat[5 + 3 * k]);
        }
        let mut i = 3 + 3 * out.pose.len();
        for z in out.hand_pose.iter_mut() {
            for c in z.iter_mut() {
                *c = flat[i];
                i += 1;
            }
        }
        out
    }
}

pub(crate) mod vec3_serde {
    use super::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::from(a))
    }
}

pub(crate) mod vec3_list_serde {
    use super::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec3], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec3>, D::Error> {
        let a = Vec::<[f64; 3]>::deserialize(d)?;
        Ok(a.into_iter().map(Vec3::from).collect())
    }
}
