use serde::{Deserialize, Serialize};

use super::energy::EnergyBreakdown;
use crate::body::BodyParams;
use crate::camera::ConsensusWeights;

/// Output of a frame or window fit, indexed by frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub frames: Vec<BodyParams>,
    /// Final energy of each frame. In a window fit the smoothness between
    /// frames `t` and `t + 1` is booked on frame `t + 1`.
    pub energies: Vec<EnergyBreakdown>,
    pub weights: Vec<ConsensusWeights>,
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
    /// Objective value before the first step and after each accepted step.
    /// One entry per frame for frame fits, one per window for window fits.
    pub history: Vec<Vec<f64>>,
}

impl FitResult {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn total_energy(&self) -> f64 {
        self.energies.iter().map(|e| e.total).sum()
    }

    /// Concatenates results of consecutive frames or windows.
    pub fn concat(parts: impl IntoIterator<Item = FitResult>) -> FitResult {
        let mut out = FitResult {
            frames: Vec::new(),
            energies: Vec::new(),
            weights: Vec::new(),
            converged: Vec::new(),
            iterations: Vec::new(),
            history: Vec::new(),
        };
        for p in parts {
            out.frames.extend(p.frames);
            out.energies.extend(p.energies);
            out.weights.extend(p.weights);
            out.converged.extend(p.converged);
            out.iterations.extend(p.iterations);
            out.history.extend(p.history);
        }
        out
    }
}
