use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights and solver settings for the fitting objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    /// Geman-McClure scale, pixels.
    pub sigma_gm: f64,
    pub lambda_pose: f64,
    pub lambda_bend: f64,
    pub lambda_shape: f64,
    pub lambda_bone: f64,
    pub lambda_sm_body: f64,
    pub lambda_sm_hand: f64,
    /// Sharpness of the one-sided bend penalty `exp(kappa * a) - 1`.
    pub bend_kappa: f64,
    /// Frames per batch window.
    pub window: usize,
    /// Iterations per optimisation stage.
    pub max_iterations: usize,
    /// Stop when the relative energy decrease of an accepted step falls
    /// below this value.
    pub tolerance: f64,
    /// Geman-McClure on the data terms; `false` uses plain squared error.
    pub robust: bool,
    /// Reserved for a mesh interpenetration term; must be 0.
    pub lambda_collision: f64,
    /// Reserved for an expression prior; must be 0.
    pub lambda_expression: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            sigma_gm: 100.0,
            lambda_pose: 1e-3,
            lambda_bend: 10.0,
            lambda_shape: 0.0,
            lambda_bone: 0.5,
            lambda_sm_body: 100.0,
            lambda_sm_hand: 1.0,
            bend_kappa: 1.0,
            window: 30,
            max_iterations: 100,
            tolerance: 1e-10,
            robust: true,
            lambda_collision: 0.0,
            lambda_expression: 0.0,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_gm > 0.0) {
            return Err(Error::invalid("energy config", "sigma_gm must be positive"));
        }
        let lambdas = [
            ("lambda_pose", self.lambda_pose),
            ("lambda_bend", self.lambda_bend),
            ("lambda_shape", self.lambda_shape),
            ("lambda_bone", self.lambda_bone),
            ("lambda_sm_body", self.lambda_sm_body),
            ("lambda_sm_hand", self.lambda_sm_hand),
            ("bend_kappa", self.bend_kappa),
        ];
        for (name, v) in lambdas {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid("energy config", format!("{name} must be a non-negative number")));
            }
        }
        if self.window < 1 {
            return Err(Error::invalid("energy config", "window must be at least 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::invalid("energy config", "tolerance must be non-negative"));
        }
        if self.lambda_collision != 0.0 || self.lambda_expression != 0.0 {
            return Err(Error::invalid(
                "energy config",
                "lambda_collision and lambda_expression are reserved and must be 0",
            ));
        }
        Ok(())
    }
}
