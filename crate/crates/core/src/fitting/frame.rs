use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::EnergyConfig;
use super::energy::FrameProblem;
use super::result::FitResult;
use super::solver::{levenberg_marquardt, Dense};
use crate::body::{BodyModel, BodyParams};
use crate::camera::{consensus_weights, Camera, ConsensusConfig, ConsensusWeights, KeypointSet};
use crate::error::{Error, Result};
use crate::par::Execution;

/// How per-view joint weights are obtained for a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Consensus(ConsensusConfig),
    /// Every view weighted 1.
    Uniform,
    Given(ConsensusWeights),
}

impl Default for Weighting {
    fn default() -> Self {
        Weighting::Consensus(ConsensusConfig::default())
    }
}

impl Weighting {
    pub(crate) fn resolve(&self, cams: &[Camera], keypoints: &KeypointSet) -> Result<ConsensusWeights> {
        match self {
            Weighting::Consensus(cfg) => consensus_weights(cams, keypoints, cfg, Execution::Sequential),
            Weighting::Uniform => Ok(ConsensusWeights::uniform(cams.len(), keypoints.joint_count())),
            Weighting::Given(w) => Ok(w.clone()),
        }
    }
}

/// Free entries of the flat parameter vector in the first stage: translation
/// and global orientation.
pub(crate) fn stage_one_free() -> Vec<usize> {
    (0..6).collect()
}

/// Free entries in the second stage: everything but the raw rotations of
/// hand joints, which move through their low-dimensional coefficients.
pub(crate) fn stage_two_free(model: &BodyModel) -> Vec<usize> {
    let mut free: Vec<usize> = (0..3).collect();
    for j in 0..model.joint_count() {
        if !model.is_hand_joint(j) {
            free.extend(3 + 3 * j..6 + 3 * j);
        }
    }
    free.extend(3 + 3 * model.joint_count()..model.flat_len());
    free
}

pub(crate) fn check_inputs(
    model: &BodyModel,
    cams: &[Camera],
    keypoints: &KeypointSet,
    init: &BodyParams,
    cfg: &EnergyConfig,
) -> Result<()> {
    cfg.validate()?;
    model.check_params(init)?;
    keypoints.validate()?;
    for c in cams {
        c.validate()?;
    }
    if !keypoints.any_observed() {
        return Err(Error::NoObservations);
    }
    Ok(())
}

pub(crate) struct StagedFit {
    pub(crate) params: BodyParams,
    pub(crate) history: Vec<f64>,
    pub(crate) iterations: usize,
    pub(crate) converged: bool,
}

/// Runs both stages on an already validated problem.
pub(crate) fn solve_staged(problem: &FrameProblem<'_>, init: &BodyParams) -> StagedFit {
    let cfg = problem.cfg;
    let energy = |x: &DVector<f64>| problem.energy(&init.with_flat(x));
    let mut x = init.to_flat();
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut converged = true;
    for free in [stage_one_free(), stage_two_free(problem.model)] {
        let linearize = |x: &DVector<f64>| {
            let ev = problem.evaluate(&init.with_flat(x), true);
            Dense {
                gradient: ev.gradient.expect("derivatives requested"),
                hessian: ev.hessian.expect("derivatives requested"),
                free: free.clone(),
            }
        };
        let out = levenberg_marquardt(x, energy, linearize, cfg.max_iterations, cfg.tolerance);
        match history.last() {
            Some(_) => history.extend_from_slice(&out.history[1..]),
            None => history = out.history.clone(),
        }
        iterations += out.iterations;
        converged = out.converged;
        x = out.x;
    }
    debug_assert!(history.windows(2).all(|w| w[1] <= w[0]));
    StagedFit {
        params: init.with_flat(&x),
        history,
        iterations,
        converged,
    }
}

/// Fits one frame by minimising the multiview objective, first over the
/// global rigid motion and then over all pose parameters. Shape stays at
/// `init.shape`.
pub fn fit_frame(
    model: &BodyModel,
    cams: &[Camera],
    keypoints: &KeypointSet,
    init: &BodyParams,
    cfg: &EnergyConfig,
    weighting: &Weighting,
) -> Result<FitResult> {
    check_inputs(model, cams, keypoints, init, cfg)?;
    let weights = weighting.resolve(cams, keypoints)?;
    let problem = FrameProblem::new(model, &init.shape, cams, keypoints, weights, cfg)?;
    let fit = solve_staged(&problem, init);
    let breakdown = problem.evaluate(&fit.params, false).breakdown;
    Ok(FitResult {
        frames: vec![fit.params],
        energies: vec![breakdown],
        weights: vec![problem.weights],
        converged: vec![fit.converged],
        iterations: vec![fit.iterations],
        history: vec![fit.history],
    })
}
