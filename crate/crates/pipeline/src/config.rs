use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hsc_core::camera::ConsensusConfig;
use hsc_core::contact::ContactConfig;
use hsc_core::fitting::EnergyConfig;
use hsc_core::predictor::TrainConfig;
use serde::{Deserialize, Serialize};

/// Which keypoint file of a sequence the fit reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeypointVariant {
    #[default]
    Clean,
    Noisy,
}

impl KeypointVariant {
    pub fn file_name(self) -> &'static str {
        match self {
            KeypointVariant::Clean => "clean.jsonl",
            KeypointVariant::Noisy => "noisy.jsonl",
        }
    }
}

/// How view weights are chosen during fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingMode {
    #[default]
    Consensus,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub cameras: usize,
    pub walk_frames: usize,
    pub sit_frames: usize,
    /// Frames of the training-split walk by a second subject.
    pub train_frames: usize,
    /// Gaussian pixel noise of the noisy keypoint files.
    pub noise_px: f64,
    /// View displaced on every joint in the noisy keypoint files.
    pub corrupt_view: Option<usize>,
    pub corruption_px: f64,
    /// Number of single-view pose estimates per frame.
    pub estimates: usize,
    /// Per-joint perturbation of the estimates, degrees.
    pub estimate_noise_deg: f64,
    /// Noise on the scene correspondences, metres.
    pub correspondence_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            cameras: 4,
            walk_frames: 30,
            sit_frames: 15,
            train_frames: 10,
            noise_px: 1.0,
            corrupt_view: None,
            corruption_px: 80.0,
            estimates: 4,
            estimate_noise_deg: 10.0,
            correspondence_noise: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(4..=8).contains(&self.cameras) {
            bail!("synth.cameras must lie in 4..=8, got {}", self.cameras);
        }
        if self.walk_frames == 0 || self.sit_frames == 0 || self.train_frames == 0 {
            bail!("synth frame counts must be positive");
        }
        if let Some(v) = self.corrupt_view {
            if v >= self.cameras {
                bail!("synth.corrupt_view {v} out of range for {} cameras", self.cameras);
            }
        }
        if self.estimates == 0 {
            bail!("synth.estimates must be positive");
        }
        for (name, x) in [
            ("noise_px", self.noise_px),
            ("corruption_px", self.corruption_px),
            ("estimate_noise_deg", self.estimate_noise_deg),
            ("correspondence_noise", self.correspondence_noise),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                bail!("synth.{name} must be finite and non-negative");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Dataset root; every command reads and writes below it.
    pub output: PathBuf,
    /// Method name in the contact table.
    pub method: String,
    pub keypoints: KeypointVariant,
    pub weighting: WeightingMode,
    pub energy: EnergyConfig,
    pub consensus: ConsensusConfig,
    pub contact: ContactConfig,
    pub predictor: TrainConfig,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output: PathBuf::from("hsc-data"),
            method: "multiview-fit".into(),
            keypoints: KeypointVariant::default(),
            weighting: WeightingMode::default(),
            energy: EnergyConfig::default(),
            consensus: ConsensusConfig::default(),
            contact: ContactConfig::default(),
            predictor: TrainConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses TOML; unknown keys are rejected with their name.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.method.trim().is_empty() || self.method.contains([',', '\n']) {
            bail!("method must be a non-empty name without commas or newlines");
        }
        self.energy.validate()?;
        self.consensus.validate()?;
        self.contact.validate()?;
        self.predictor.validate()?;
        self.synth.validate()
    }
}
