/// Geman-McClure robustifier `σ²r² / (σ² + r²)`, bounded by `σ²`.
pub fn gm_loss(r: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let r2 = r * r;
    s2 * r2 / (s2 + r2)
}

/// Value and derivative of the robustifier as a function of the squared
/// residual `s = r²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Robustifier {
    GemanMcClure { sigma: f64 },
    /// Plain squared error; `sigma` only sets the behind-camera ceiling.
    Squared { sigma: f64 },
}

impl Robustifier {
    pub(crate) fn eval(self, s: f64) -> (f64, f64) {
        match self {
            Robustifier::GemanMcClure { sigma } => {
                let s2 = sigma * sigma;
                let d = s2 + s;
                (s2 * s / d, s2 * s2 / (d * d))
            }
            Robustifier::Squared { .. } => (s, 1.0),
        }
    }

    /// Contribution of a residual that cannot be evaluated (behind camera).
    pub(crate) fn ceiling(self) -> f64 {
        match self {
            Robustifier::GemanMcClure { sigma } | Robustifier::Squared { sigma } => sigma * sigma,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_at_zero() {
        assert_eq!(gm_loss(0.0, 3.0), 0.0);
    }

    #[test]
    fn half_sigma_squared_at_sigma() {
        for sigma in [0.5, 1.0, 100.0] {
            assert!((gm_loss(sigma, sigma) - sigma * sigma / 2.0).abs() < 1e-12 * sigma * sigma);
        }
    }

    #[test]
    fn saturates_at_sigma_squared() {
        let sigma = 7.0;
        let v = gm_loss(1e6 * sigma, sigma);
        assert!(((v - sigma * sigma) / (sigma * sigma)).abs() < 1e-6);
        assert!(v <= sigma * sigma);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let r = Robustifier::GemanMcClure { sigma: 4.0 };
        for s in [0.1, 3.0, 50.0] {
            let h = 1e-6;
            let fd = (r.eval(s + h).0 - r.eval(s - h).0) / (2.0 * h);
            assert!((fd - r.eval(s).1).abs() < 1e-8);
            assert!((r.eval(s).0 - gm_loss(s.sqrt(), 4.0)).abs() < 1e-12);
        }
    }
}
