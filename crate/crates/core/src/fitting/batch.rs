use nalgebra::{DMatrix, DVector};

use super::config::EnergyConfig;
use super::energy::{EnergyBreakdown, FrameProblem};
use super::frame::{check_inputs, fit_frame, solve_staged, stage_two_free, Weighting};
use super::result::FitResult;
use super::solver::{levenberg_marquardt, BlockTridiagonal};
use crate::body::{BodyModel, BodyParams};
use crate::camera::{Camera, ConsensusWeights, KeypointSet};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::par::{self, Execution};

/// Fits a sequence in consecutive windows of `cfg.window` frames. Each
/// window minimises the sum of per-frame objectives plus temporal smoothness
/// of 3D joints and hand coefficients. Windows are independent of each
/// other and run under `exec`; the solve inside a window is sequential.
pub fn fit_batch(
    model: &BodyModel,
    cams: &[Camera],
    keypoints: &[KeypointSet],
    inits: &[BodyParams],
    cfg: &EnergyConfig,
    weighting: &Weighting,
    exec: Execution,
) -> Result<FitResult> {
    cfg.validate()?;
    if keypoints.is_empty() {
        return Err(Error::Empty("keypoint frames"));
    }
    if inits.len() != keypoints.len() {
        return Err(Error::DimensionMismatch {
            field: "initial parameters",
            expected: keypoints.len(),
            actual: inits.len(),
        });
    }
    let starts: Vec<usize> = (0..keypoints.len()).step_by(cfg.window).collect();
    let parts = par::map(exec, &starts, |&s| {
        let e = (s + cfg.window).min(keypoints.len());
        fit_window(model, cams, &keypoints[s..e], &inits[s..e], cfg, weighting, exec)
    });
    Ok(FitResult::concat(parts.into_iter().collect::<Result<Vec<_>>>()?))
}

/// Window objective (per-frame energies plus temporal smoothness) at
/// `frames` under fixed `weights`, and its gradient stacked frame by frame.
pub fn energy_window_with_gradient(
    model: &BodyModel,
    cams: &[Camera],
    keypoints: &[KeypointSet],
    frames: &[BodyParams],
    weights: &[ConsensusWeights],
    cfg: &EnergyConfig,
) -> Result<(f64, DVector<f64>)> {
    if frames.is_empty() {
        return Err(Error::Empty("frames"));
    }
    for (field, len) in [("keypoint frames", keypoints.len()), ("consensus weights", weights.len())] {
        if len != frames.len() {
            return Err(Error::DimensionMismatch { field, expected: frames.len(), actual: len });
        }
    }
    for p in frames {
        model.check_params(p)?;
    }
    let problems = keypoints
        .iter()
        .zip(frames)
        .zip(weights)
        .map(|((k, p), w)| FrameProblem::new(model, &p.shape, cams, k, w.clone(), cfg))
        .collect::<Result<Vec<_>>>()?;
    let n = model.flat_len();
    let window = Window { problems, templates: frames.to_vec(), n, hands: 3 + 3 * model.joint_count()..n, cfg };
    let mut x = DVector::zeros(n * frames.len());
    for (t, p) in frames.iter().enumerate() {
        x.rows_mut(t * n, n).copy_from(&p.to_flat());
    }
    let lin = window.linearize(&x, &[]);
    let mut g = DVector::zeros(x.len());
    for (t, gt) in lin.gradient.iter().enumerate() {
        g.rows_mut(t * n, n).copy_from(gt);
    }
    Ok((window.energy(&x), g))
}

struct Window<'a> {
    problems: Vec<FrameProblem<'a>>,
    templates: Vec<BodyParams>,
    n: usize,
    hands: std::ops::Range<usize>,
    cfg: &'a EnergyConfig,
}

impl Window<'_> {
    fn frame_params(&self, x: &DVector<f64>) -> Vec<BodyParams> {
        self.templates
            .iter()
            .enumerate()
            .map(|(t, p)| p.with_flat(&x.rows(t * self.n, self.n).into_owned()))
            .collect()
    }

    /// Per-frame breakdowns with smoothness of pair `(t - 1, t)` on frame `t`.
    fn breakdowns(&self, x: &DVector<f64>) -> Vec<EnergyBreakdown> {
        let params = self.frame_params(x);
        let mut out: Vec<EnergyBreakdown> = Vec::with_capacity(params.len());
        let mut prev: Option<Vec<Vec3>> = None;
        for (t, (problem, p)) in self.problems.iter().zip(&params).enumerate() {
            let ev = problem.evaluate(p, false);
            let mut b = ev.breakdown;
            if let Some(pj) = &prev {
                b.smooth_body = pj.iter().zip(&ev.joints).map(|(a, c)| (c - a).norm_squared()).sum();
                b.smooth_hand = self
                    .hands
                    .clone()
                    .map(|i| (x[t * self.n + i] - x[(t - 1) * self.n + i]).powi(2))
                    .sum();
            }
            prev = Some(ev.joints);
            out.push(b.finish(self.cfg));
        }
        out
    }

    fn energy(&self, x: &DVector<f64>) -> f64 {
        self.breakdowns(x).iter().map(|b| b.total).sum()
    }

    fn linearize(&self, x: &DVector<f64>, free: &[usize]) -> BlockTridiagonal {
        let params = self.frame_params(x);
        let evals: Vec<_> = self.problems.iter().zip(&params).map(|(pr, p)| pr.evaluate(p, true)).collect();
        let mut gradient: Vec<DVector<f64>> = Vec::with_capacity(evals.len());
        let mut diag: Vec<DMatrix<f64>> = Vec::with_capacity(evals.len());
        let mut jacs = Vec::with_capacity(evals.len());
        let mut joints = Vec::with_capacity(evals.len());
        for ev in evals {
            gradient.push(ev.gradient.expect("derivatives requested"));
            diag.push(ev.hessian.expect("derivatives requested"));
            jacs.push(ev.joint_jacobian.expect("derivatives requested"));
            joints.push(ev.joints);
        }
        let lb = self.cfg.lambda_sm_body;
        let lh = self.cfg.lambda_sm_hand;
        let mut upper = Vec::with_capacity(diag.len().saturating_sub(1));
        for t in 0..diag.len().saturating_sub(1) {
            let r = DVector::from_iterator(
                joints[t].len() * 3,
                joints[t].iter().zip(&joints[t + 1]).flat_map(|(a, b)| (b - a).iter().copied().collect::<Vec<_>>()),
            );
            let (a, b) = (&jacs[t], &jacs[t + 1]);
            gradient[t].gemv_tr(-2.0 * lb, a, &r, 1.0);
            gradient[t + 1].gemv_tr(2.0 * lb, b, &r, 1.0);
            diag[t].gemm_tr(2.0 * lb, a, a, 1.0);
            diag[t + 1].gemm_tr(2.0 * lb, b, b, 1.0);
            let mut u = a.tr_mul(b) * (-2.0 * lb);
            for i in self.hands.clone() {
                let d = x[(t + 1) * self.n + i] - x[t * self.n + i];
                gradient[t][i] -= 2.0 * lh * d;
                gradient[t + 1][i] += 2.0 * lh * d;
                diag[t][(i, i)] += 2.0 * lh;
                diag[t + 1][(i, i)] += 2.0 * lh;
                u[(i, i)] -= 2.0 * lh;
            }
            upper.push(u);
        }
        BlockTridiagonal { gradient, diag, upper, free: free.to_vec() }
    }
}

fn fit_window(
    model: &BodyModel,
    cams: &[Camera],
    keypoints: &[KeypointSet],
    inits: &[BodyParams],
    cfg: &EnergyConfig,
    weighting: &Weighting,
    exec: Execution,
) -> Result<FitResult> {
    if keypoints.len() == 1 {
        return fit_frame(model, cams, &keypoints[0], &inits[0], cfg, weighting);
    }
    for (k, p) in keypoints.iter().zip(inits) {
        check_inputs(model, cams, k, p, cfg)?;
    }
    let weights = par::map_range(exec, keypoints.len(), |t| weighting.resolve(cams, &keypoints[t]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let problems = keypoints
        .iter()
        .zip(inits)
        .zip(weights)
        .map(|((k, p), w)| FrameProblem::new(model, &p.shape, cams, k, w, cfg))
        .collect::<Result<Vec<_>>>()?;
    let n = model.flat_len();
    let window = Window {
        templates: inits.to_vec(),
        n,
        hands: 3 + 3 * model.joint_count()..n,
        cfg,
        problems,
    };
    let stack = |ps: &[BodyParams]| {
        let mut x = DVector::zeros(n * ps.len());
        for (t, p) in ps.iter().enumerate() {
            x.rows_mut(t * n, n).copy_from(&p.to_flat());
        }
        x
    };

    // Independent per-frame fits give the starting point; fall back to the
    // given initialisation if they worsen the coupled objective.
    let per_frame: Vec<BodyParams> =
        par::map_range(exec, inits.len(), |t| solve_staged(&window.problems[t], &inits[t]).params);
    let x_init = stack(inits);
    let x_frames = stack(&per_frame);
    let e_init = window.energy(&x_init);
    let e_frames = window.energy(&x_frames);
    let x0 = if e_frames <= e_init { x_frames } else { x_init };
    let free = stage_two_free(model);
    let mut out = levenberg_marquardt(
        x0,
        |x| window.energy(x),
        |x| window.linearize(x, &free),
        cfg.max_iterations,
        cfg.tolerance,
    );
    out.history.insert(0, e_init);
    let breakdowns = window.breakdowns(&out.x);
    let t_count = inits.len();
    let Window { problems, .. } = window;
    Ok(FitResult {
        frames: Window::params_of(inits, &out.x, n),
        energies: breakdowns,
        weights: problems.into_iter().map(|p| p.weights).collect(),
        converged: vec![out.converged; t_count],
        iterations: vec![out.iterations; t_count],
        history: vec![out.history],
    })
}

impl Window<'_> {
    fn params_of(templates: &[BodyParams], x: &DVector<f64>, n: usize) -> Vec<BodyParams> {
        templates
            .iter()
            .enumerate()
            .map(|(t, p)| p.with_flat(&x.rows(t * n, n).into_owned()))
            .collect()
    }
}
