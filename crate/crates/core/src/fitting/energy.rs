//! Energy terms of the multiview objective with analytic gradients and
//! Gauss-Newton (IRLS) Hessian approximations, all with respect to the flat
//! parameter vector `[translation | pose | hands]`.

use nalgebra::{DMatrix, DVector, Matrix2xX, Vector2};
use serde::{Deserialize, Serialize};

use super::config::EnergyConfig;
use super::loss::Robustifier;
use crate::body::{BodyModel, BodyParams, ShapedBody};
use crate::camera::{Camera, ConsensusWeights, KeypointSet};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Unweighted value of every term; `total` applies the λ weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub joints: f64,
    pub bones: f64,
    pub pose_prior: f64,
    pub bend_prior: f64,
    pub shape_prior: f64,
    pub smooth_body: f64,
    pub smooth_hand: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn weighted_total(&self, cfg: &EnergyConfig) -> f64 {
        self.joints
            + cfg.lambda_bone * self.bones
            + cfg.lambda_pose * self.pose_prior
            + cfg.lambda_bend * self.bend_prior
            + cfg.lambda_shape * self.shape_prior
            + cfg.lambda_sm_body * self.smooth_body
            + cfg.lambda_sm_hand * self.smooth_hand
    }

    pub(crate) fn finish(mut self, cfg: &EnergyConfig) -> Self {
        self.total = self.weighted_total(cfg);
        self
    }
}

/// Value, gradient and approximate Hessian of one term.
#[derive(Debug, Clone)]
pub struct TermEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl TermEval {
    fn zeros(n: usize) -> Self {
        Self {
            value: 0.0,
            gradient: DVector::zeros(n),
            hessian: DMatrix::zeros(n, n),
        }
    }
}

pub(crate) fn robustifier(cfg: &EnergyConfig) -> Robustifier {
    if cfg.robust {
        Robustifier::GemanMcClure { sigma: cfg.sigma_gm }
    } else {
        Robustifier::Squared { sigma: cfg.sigma_gm }
    }
}

/// Posed joints projected into every camera, with 2×n Jacobians when
/// requested. `None` marks a joint behind the camera.
pub(crate) struct Projections {
    pub(crate) uv: Vec<Vec<Option<Vector2<f64>>>>,
    pub(crate) jac: Vec<Vec<Option<Matrix2xX<f64>>>>,
}

pub(crate) fn project_joints(
    joints: &[Vec3],
    joint_jac: Option<&DMatrix<f64>>,
    cams: &[Camera],
) -> Projections {
    let mut uv = Vec::with_capacity(cams.len());
    let mut jac = Vec::with_capacity(cams.len());
    for cam in cams {
        let mut row_uv = Vec::with_capacity(joints.len());
        let mut row_j = Vec::with_capacity(joints.len());
        for (k, p) in joints.iter().enumerate() {
            match cam.project_with_jacobian(p) {
                Ok((px, dp)) => {
                    row_uv.push(Some(px));
                    row_j.push(joint_jac.map(|jj| dp * jj.rows(3 * k, 3)));
                }
                Err(_) => {
                    row_uv.push(None);
                    row_j.push(None);
                }
            }
        }
        uv.push(row_uv);
        jac.push(row_j);
    }
    Projections { uv, jac }
}

fn accumulate(
    out: &mut TermEval,
    weight: f64,
    rho: Robustifier,
    residual: &Vector2<f64>,
    jac: Option<&Matrix2xX<f64>>,
) {
    let (value, slope) = rho.eval(residual.norm_squared());
    out.value += weight * value;
    if let Some(j) = jac {
        let c = 2.0 * weight * slope;
        out.gradient.gemv_tr(c, j, residual, 1.0);
        out.hessian.gemm_tr(c, j, j, 1.0);
    }
}

fn check_views(cams: &[Camera], keypoints: &KeypointSet, weights: &ConsensusWeights, joints: usize) -> Result<()> {
    if keypoints.camera_count() != cams.len() {
        return Err(Error::DimensionMismatch { field: "keypoint views", expected: cams.len(), actual: keypoints.camera_count() });
    }
    if keypoints.joint_count() != joints {
        return Err(Error::DimensionMismatch { field: "keypoint joints", expected: joints, actual: keypoints.joint_count() });
    }
    if weights.weights.len() != cams.len() || weights.weights.iter().any(|w| w.len() != joints) {
        return Err(Error::DimensionMismatch { field: "consensus weights", expected: cams.len(), actual: weights.weights.len() });
    }
    Ok(())
}

/// `Σ_c Σ_j γ·w·ρ(‖π_c(J_j) − x_cj‖)`.
pub(crate) fn joints_term(
    proj: &Projections,
    keypoints: &KeypointSet,
    weights: &ConsensusWeights,
    rho: Robustifier,
    n: usize,
) -> TermEval {
    let mut out = TermEval::zeros(n);
    for (c, view) in keypoints.views.iter().enumerate() {
        for (j, det) in view.iter().enumerate() {
            if !det.is_observed() {
                continue;
            }
            let w = det.confidence * weights.get(c, j);
            match proj.uv[c][j] {
                Some(uv) => accumulate(&mut out, w, rho, &(uv - det.uv), proj.jac[c][j].as_ref()),
                None => out.value += w * rho.ceiling(),
            }
        }
    }
    out
}

/// `Σ_c Σ_bones γ·w·ρ(‖b' − b‖)` with 2D bone vectors `b' = x_child −
/// x_parent` (detected) and `b = π(J_child) − π(J_parent)` (model). The bone
/// confidence and weight are the smaller of the two endpoints'.
pub(crate) fn bones_term(
    proj: &Projections,
    bones: &[(usize, usize)],
    keypoints: &KeypointSet,
    weights: &ConsensusWeights,
    rho: Robustifier,
    n: usize,
) -> TermEval {
    let mut out = TermEval::zeros(n);
    for (c, view) in keypoints.views.iter().enumerate() {
        for &(p, ch) in bones {
            let (dp, dc) = (&view[p], &view[ch]);
            if !(dp.is_observed() && dc.is_observed()) {
                continue;
            }
            let w = dp.confidence.min(dc.confidence) * weights.get(c, p).min(weights.get(c, ch));
            match (proj.uv[c][p], proj.uv[c][ch]) {
                (Some(up), Some(uc)) => {
                    let residual = bone_residual(&up, &uc, &dp.uv, &dc.uv);
                    let jac = match (&proj.jac[c][p], &proj.jac[c][ch]) {
                        (Some(jp), Some(jc)) => Some(jc - jp),
                        _ => None,
                    };
                    accumulate(&mut out, w, rho, &residual, jac.as_ref());
                }
                _ => out.value += w * rho.ceiling(),
            }
        }
    }
    out
}

/// `(π(J_child) − π(J_parent)) − (x_child − x_parent)`.
pub fn bone_residual(
    proj_parent: &Vector2<f64>,
    proj_child: &Vector2<f64>,
    det_parent: &Vector2<f64>,
    det_child: &Vector2<f64>,
) -> Vector2<f64> {
    (proj_child - proj_parent) - (det_child - det_parent)
}

/// Joints covered by the pose prior: all but the root and hand joints.
pub(crate) fn body_pose_joints(model: &BodyModel) -> Vec<usize> {
    (1..model.joint_count()).filter(|&j| !model.is_hand_joint(j)).collect()
}

/// Prior terms, unweighted: `(‖θ_body‖², Σ bend penalties, ‖β‖²)` plus the
/// λ-weighted gradient and Hessian.
pub(crate) fn priors_term(model: &BodyModel, params: &BodyParams, cfg: &EnergyConfig) -> (EnergyBreakdown, TermEval) {
    let n = model.flat_len();
    let mut out = TermEval::zeros(n);
    let mut br = EnergyBreakdown::default();
    for j in body_pose_joints(model) {
        let th = params.pose[j];
        br.pose_prior += th.norm_squared();
        for i in 0..3 {
            let idx = 3 + 3 * j + i;
            out.gradient[idx] += 2.0 * cfg.lambda_pose * th[i];
            out.hessian[(idx, idx)] += 2.0 * cfg.lambda_pose;
        }
    }
    let kappa = cfg.bend_kappa;
    for bend in model.bend_joints() {
        let hyper = -model.flexion_angle(bend, params);
        if hyper <= 0.0 {
            continue;
        }
        let e = (kappa * hyper).exp();
        br.bend_prior += e - 1.0;
        // d(hyper)/dθ = -axis
        let axis = Vec3::from(bend.axis);
        for i in 0..3 {
            let ii = 3 + 3 * bend.joint + i;
            out.gradient[ii] += cfg.lambda_bend * kappa * e * -axis[i];
            for k in 0..3 {
                let kk = 3 + 3 * bend.joint + k;
                out.hessian[(ii, kk)] += cfg.lambda_bend * kappa * kappa * e * axis[i] * axis[k];
            }
        }
    }
    br.shape_prior = params.shape.iter().map(|b| b * b).sum();
    out.value = cfg.lambda_pose * br.pose_prior + cfg.lambda_bend * br.bend_prior + cfg.lambda_shape * br.shape_prior;
    (br, out)
}

/// Everything needed to evaluate the per-frame objective `E_mv`.
#[derive(Debug, Clone)]
pub struct FrameProblem<'a> {
    pub model: &'a BodyModel,
    pub shaped: ShapedBody,
    pub cams: &'a [Camera],
    pub keypoints: &'a KeypointSet,
    pub weights: ConsensusWeights,
    pub cfg: &'a EnergyConfig,
    bones: Vec<(usize, usize)>,
}

/// Result of evaluating [`FrameProblem`] at one parameter vector.
#[derive(Debug, Clone)]
pub struct FrameEval {
    pub breakdown: EnergyBreakdown,
    pub joints: Vec<Vec3>,
    pub joint_jacobian: Option<DMatrix<f64>>,
    pub gradient: Option<DVector<f64>>,
    pub hessian: Option<DMatrix<f64>>,
}

impl<'a> FrameProblem<'a> {
    pub fn new(
        model: &'a BodyModel,
        shape: &[f64],
        cams: &'a [Camera],
        keypoints: &'a KeypointSet,
        weights: ConsensusWeights,
        cfg: &'a EnergyConfig,
    ) -> Result<Self> {
        check_views(cams, keypoints, &weights, model.joint_count())?;
        Ok(Self {
            model,
            shaped: model.shaped(shape)?,
            cams,
            keypoints,
            weights,
            cfg,
            bones: model.bones(),
        })
    }

    pub fn evaluate(&self, params: &BodyParams, derivatives: bool) -> FrameEval {
        let n = self.model.flat_len();
        let (joints, jac) = if derivatives {
            let (j, jac) = self.model.posed_joints_jacobian(&self.shaped, params);
            (j, Some(jac))
        } else {
            (self.model.posed_joints(&self.shaped, params), None)
        };
        let proj = project_joints(&joints, jac.as_ref(), self.cams);
        let rho = robustifier(self.cfg);
        let ej = joints_term(&proj, self.keypoints, &self.weights, rho, n);
        let eo = bones_term(&proj, &self.bones, self.keypoints, &self.weights, rho, n);
        let (mut breakdown, prior) = priors_term(self.model, params, self.cfg);
        breakdown.joints = ej.value;
        breakdown.bones = eo.value;
        let breakdown = breakdown.finish(self.cfg);
        let (gradient, hessian) = if derivatives {
            let lb = self.cfg.lambda_bone;
            let g = ej.gradient + eo.gradient * lb + prior.gradient;
            let h = ej.hessian + eo.hessian * lb + prior.hessian;
            (Some(g), Some(h))
        } else {
            (None, None)
        };
        FrameEval {
            breakdown,
            joints,
            joint_jacobian: jac,
            gradient,
            hessian,
        }
    }

    pub fn energy(&self, params: &BodyParams) -> f64 {
        self.evaluate(params, false).breakdown.total
    }
}

fn problem_for<'a>(
    model: &'a BodyModel,
    params: &BodyParams,
    cams: &'a [Camera],
    keypoints: &'a KeypointSet,
    weights: &ConsensusWeights,
    cfg: &'a EnergyConfig,
) -> Result<FrameProblem<'a>> {
    model.check_params(params)?;
    FrameProblem::new(model, &params.shape, cams, keypoints, weights.clone(), cfg)
}

fn term_with_gradient(
    model: &BodyModel,
    params: &BodyParams,
    cams: &[Camera],
    keypoints: &KeypointSet,
    weights: &ConsensusWeights,
    cfg: &EnergyConfig,
    bones: bool,
) -> Result<(f64, DVector<f64>)> {
    let problem = problem_for(model, params, cams, keypoints, weights, cfg)?;
    let (joints, jac) = model.posed_joints_jacobian(&problem.shaped, params);
    let proj = project_joints(&joints, Some(&jac), cams);
    let rho = robustifier(cfg);
    let t = if bones {
        bones_term(&proj, &problem.bones, keypoints, weights, rho, model.flat_len())
    } else {
        joints_term(&proj, keypoints, weights, rho, model.flat_len())
    };
    Ok((t.value, t.gradient))
}

/// Multiview joint reprojection energy `Σ_c E_J^c`.
pub fn energy_joints(
    model: &BodyModel,
    params: &BodyParams,
    cams: &[Camera],
    keypoints: &KeypointSet,
    weights: &ConsensusWeights,
    cfg: &EnergyConfig,
) -> Result<f64> {
    let problem = problem_for(model, params, cams, keypoints, weights, cfg)?;
    let joints = model.posed_joints(&problem.shaped, params);
    let proj = project_joints(&joints, None, cams);
    Ok(joints_term(&proj, keypoints, weights, robustifier(cfg), 0).value)
}

/// [`energy_joints`] and its gradient with respect to the flat parameters.
pub fn energy_joints_with_gradient(
    model: &BodyModel,
    params: &BodyParams,
    cams: &[Camera],
    keypoints: &KeypointSet,
    weights: &ConsensusWeights,
    cfg: &EnergyConfig,
) -> Result<(f64, DVector<f64>)> {
    term_with_gradient(model, params, cams, keypoints, weights, cfg, false)
}

/// Multiview bone-orientation energy `Σ_c E_O^c` (without `lambda_bone`).
pub fn energy_bones(
    model: &BodyModel,
    params: &BodyParams,
    cams: &[Camera],
    keypoints: &KeypointSet,
    weights: &ConsensusWeights,
    cfg: &EnergyConfig,
) -> Result<f64> {
    let problem = problem_for(model, params, cams, keypoints, weights, cfg)?;
    let joints = model.posed_joints(&problem.shaped, params);
    let proj = project_joints(&joints, None, cams);
    Ok(bones_term(&proj, &problem.bones, keypoints, weights, robustifier(cfg), 0).value)
}

pub fn energy_bones_with_gradient(
    model: &BodyModel,
    params: &BodyParams,
    cams: &[Camera],
    keypoints: &KeypointSet,
    weights: &ConsensusWeights,
    cfg: &EnergyConfig,
) -> Result<(f64, DVector<f64>)> {
    term_with_gradient(model, params, cams, keypoints, weights, cfg, true)
}

/// λ-weighted regularisers: pose L2, one-sided bend penalty, shape L2.
pub fn energy_priors(model: &BodyModel, params: &BodyParams, cfg: &EnergyConfig) -> f64 {
    priors_term(model, params, cfg).1.value
}

pub fn energy_priors_with_gradient(model: &BodyModel, params: &BodyParams, cfg: &EnergyConfig) -> (f64, DVector<f64>) {
    let (_, t) = priors_term(model, params, cfg);
    (t.value, t.gradient)
}

/// Total `E_mv` and its gradient.
pub fn energy_frame_with_gradient(
    model: &BodyModel,
    params: &BodyParams,
    cams: &[Camera],
    keypoints: &KeypointSet,
    weights: &ConsensusWeights,
    cfg: &EnergyConfig,
) -> Result<(EnergyBreakdown, DVector<f64>)> {
    let problem = problem_for(model, params, cams, keypoints, weights, cfg)?;
    let ev = problem.evaluate(params, true);
    Ok((ev.breakdown, ev.gradient.expect("derivatives requested")))
}

/// Temporal smoothness over a window: `(Σ_t ‖J(t+1) − J(t)‖², Σ_t Σ_h
/// ‖z_h(t+1) − z_h(t)‖²)`.
pub fn smoothness_energies(model: &BodyModel, shaped: &ShapedBody, frames: &[BodyParams]) -> (f64, f64) {
    let joints: Vec<Vec<Vec3>> = frames.iter().map(|p| model.posed_joints(shaped, p)).collect();
    let body = joints
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (b - a).norm_squared()).sum::<f64>())
        .sum();
    let hand = frames
        .windows(2)
        .map(|w| {
            w[0].hand_pose
                .iter()
                .flatten()
                .zip(w[1].hand_pose.iter().flatten())
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
        })
        .sum();
    (body, hand)
}
