//! Levenberg-Marquardt over a subset of free variables, with dense and
//! block-tridiagonal normal equations.

use nalgebra::{Cholesky, DMatrix, DVector};

/// Normal equations `H δ = −g` restricted to the free variables.
pub(crate) trait NormalSystem {
    /// Step for damping `mu`, full length with zeros on fixed variables.
    fn solve_damped(&self, mu: f64) -> Option<DVector<f64>>;
}

fn damping(diag: impl Iterator<Item = f64> + Clone) -> impl Fn(f64) -> f64 {
    let max = diag.clone().fold(0.0f64, |m, d| m.max(d.abs()));
    move |h: f64| h.max(1e-9 * max).max(1e-12)
}

fn reduced(h: &DMatrix<f64>, free: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(free.len(), free.len(), |i, j| h[(free[i], free[j])])
}

/// Dense system over one parameter vector.
pub(crate) struct Dense {
    pub(crate) gradient: DVector<f64>,
    pub(crate) hessian: DMatrix<f64>,
    pub(crate) free: Vec<usize>,
}

impl NormalSystem for Dense {
    fn solve_damped(&self, mu: f64) -> Option<DVector<f64>> {
        let mut a = reduced(&self.hessian, &self.free);
        let d = damping((0..a.nrows()).map(|i| a[(i, i)]).collect::<Vec<_>>().into_iter());
        for i in 0..a.nrows() {
            a[(i, i)] += mu * d(a[(i, i)]);
        }
        let b = DVector::from_fn(self.free.len(), |i, _| -self.gradient[self.free[i]]);
        let x = Cholesky::new(a)?.solve(&b);
        let mut out = DVector::zeros(self.gradient.len());
        for (i, &f) in self.free.iter().enumerate() {
            out[f] = x[i];
        }
        Some(out)
    }
}

/// Block-tridiagonal system: `diag[t]` couples frame `t` with itself,
/// `upper[t]` couples frame `t` with frame `t + 1`. Every block is over the
/// full per-frame parameter vector; `free` selects the same entries in every
/// frame.
pub(crate) struct BlockTridiagonal {
    pub(crate) gradient: Vec<DVector<f64>>,
    pub(crate) diag: Vec<DMatrix<f64>>,
    pub(crate) upper: Vec<DMatrix<f64>>,
    pub(crate) free: Vec<usize>,
}

impl NormalSystem for BlockTridiagonal {
    fn solve_damped(&self, mu: f64) -> Option<DVector<f64>> {
        let t_count = self.diag.len();
        let n = self.gradient.first().map_or(0, |g| g.len());
        let f = &self.free;
        let all_diag = self.diag.iter().flat_map(|d| f.iter().map(move |&i| d[(i, i)]));
        let d = damping(all_diag.collect::<Vec<_>>().into_iter());
        // Forward elimination (block Thomas algorithm).
        let mut chol: Vec<Cholesky<f64, nalgebra::Dyn>> = Vec::with_capacity(t_count);
        let mut rhs: Vec<DVector<f64>> = Vec::with_capacity(t_count);
        let mut ups: Vec<DMatrix<f64>> = Vec::with_capacity(t_count);
        for t in 0..t_count {
            let mut a = reduced(&self.diag[t], f);
            for i in 0..a.nrows() {
                a[(i, i)] += mu * d(a[(i, i)]);
            }
            let mut b = DVector::from_fn(f.len(), |i, _| -self.gradient[t][f[i]]);
            if t > 0 {
                let u_prev = &ups[t - 1];
                let c_prev: &Cholesky<f64, nalgebra::Dyn> = &chol[t - 1];
                a -= u_prev.transpose() * c_prev.solve(u_prev);
                b -= u_prev.transpose() * c_prev.solve(&rhs[t - 1]);
            }
            chol.push(Cholesky::new(a)?);
            rhs.push(b);
            if t + 1 < t_count {
                ups.push(reduced(&self.upper[t], f));
            }
        }
        // Back substitution.
        let mut xs = vec![DVector::zeros(f.len()); t_count];
        for t in (0..t_count).rev() {
            let mut b = rhs[t].clone();
            if t + 1 < t_count {
                b -= &ups[t] * &xs[t + 1];
            }
            xs[t] = chol[t].solve(&b);
        }
        let mut out = DVector::zeros(n * t_count);
        for (t, x) in xs.iter().enumerate() {
            for (i, &fi) in f.iter().enumerate() {
                out[t * n + fi] = x[i];
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub(crate) x: DVector<f64>,
    /// Energy before the first step and after every accepted step.
    pub(crate) history: Vec<f64>,
    pub(crate) iterations: usize,
    pub(crate) converged: bool,
}

const STEP_SCALES: [f64; 3] = [1.0, 0.5, 0.25];
const MU_START: f64 = 1e-3;
const MU_MIN: f64 = 1e-12;

/// Minimises `energy` starting at `x0`. `linearize` returns the normal
/// system at a point. Accepted steps strictly decrease the energy.
///
/// A small relative decrease only counts as convergence when it comes from a
/// step at minimal damping; heavily damped steps crawl along weakly
/// constrained directions and would otherwise stop the solve early.
pub(crate) fn levenberg_marquardt<S: NormalSystem>(
    x0: DVector<f64>,
    energy: impl Fn(&DVector<f64>) -> f64,
    linearize: impl Fn(&DVector<f64>) -> S,
    max_iterations: usize,
    tolerance: f64,
) -> LmOutcome {
    let mut x = x0;
    let mut e = energy(&x);
    let mut history = vec![e];
    let mut mu = MU_START;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        if e == 0.0 {
            converged = true;
            break;
        }
        let system = linearize(&x);
        let mut accepted = None;
        while mu <= 1e12 {
            if let Some(step) = system.solve_damped(mu) {
                for &alpha in &STEP_SCALES {
                    let candidate = &x + &step * alpha;
                    let ec = energy(&candidate);
                    if ec.is_finite() && ec < e {
                        accepted = Some((candidate, ec));
                        break;
                    }
                }
            }
            if accepted.is_some() {
                break;
            }
            mu *= 10.0;
        }
        let Some((xn, en)) = accepted else {
            // No descent at any damping: stationary to working precision.
            converged = true;
            break;
        };
        debug_assert!(en < e);
        let rel = (e - en) / e.abs().max(f64::MIN_POSITIVE);
        x = xn;
        e = en;
        history.push(e);
        if rel < tolerance {
            if mu <= MU_MIN {
                converged = true;
                break;
            }
            mu = MU_MIN;
        } else {
            mu = (mu / 3.0).max(MU_MIN);
        }
    }
    LmOutcome { x, history, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_solver_matches_dense() {
        let n = 4;
        let t_count = 3;
        let mut rng = 12345u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let big = DMatrix::from_fn(n * t_count + 2, n * t_count, |_, _| next());
        let mut h = big.transpose() * &big;
        // Zero out blocks beyond the first off-diagonal.
        for i in 0..n * t_count {
            for j in 0..n * t_count {
                if (i / n).abs_diff(j / n) > 1 {
                    h[(i, j)] = 0.0;
                }
            }
        }
        for i in 0..n * t_count {
            h[(i, i)] += 10.0;
        }
        let g = DVector::from_fn(n * t_count, |_, _| next());
        let free = vec![0, 2, 3];
        let block = BlockTridiagonal {
            gradient: (0..t_count).map(|t| g.rows(t * n, n).into_owned()).collect(),
            diag: (0..t_count).map(|t| h.view((t * n, t * n), (n, n)).into_owned()).collect(),
            upper: (0..t_count - 1).map(|t| h.view((t * n, (t + 1) * n), (n, n)).into_owned()).collect(),
            free: free.clone(),
        };
        let all_free: Vec<usize> = (0..t_count).flat_map(|t| free.iter().map(move |f| t * n + f)).collect();
        let dense = Dense { gradient: g, hessian: h, free: all_free };
        for mu in [0.0, 1e-3, 1.0] {
            let a = block.solve_damped(mu).unwrap();
            let b = dense.solve_damped(mu).unwrap();
            assert!((a - b).norm() < 1e-10, "mu = {mu}");
        }
    }

    #[test]
    fn lm_minimises_rosenbrock_monotonically() {
        let energy = |x: &DVector<f64>| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let linearize = |x: &DVector<f64>| {
            // Residuals r = [1 - x, 10 (y - x²)].
            let r = DVector::from_vec(vec![1.0 - x[0], 10.0 * (x[1] - x[0] * x[0])]);
            let j = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, -20.0 * x[0], 10.0]);
            Dense { gradient: 2.0 * j.transpose() * &r, hessian: 2.0 * j.transpose() * j, free: vec![0, 1] }
        };
        let out = levenberg_marquardt(DVector::from_vec(vec![-1.2, 1.0]), energy, linearize, 200, 1e-15);
        assert!(out.history.windows(2).all(|w| w[1] < w[0]));
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5, "{:?}", out.x);
    }
}
