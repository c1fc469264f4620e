//! Dataset layout, configuration and orchestration of the capture pipeline:
//! synthetic data, multiview fitting, contact annotation, evaluation,
//! export and training-pair sampling.
//!
//! Dataset layout below the configured output directory:
//!
//! ```text
//! manifest.json  model.json
//! scenes/<scene>/scene.ply  correspondences.txt  alignment.json
//! sequences/<id>/cameras/cameras.json
//!                keypoints/clean.jsonl  noisy.jsonl  estimates.jsonl
//!                gt/params.jsonl  gt/contacts.jsonl
//!                fits/fit.json  contacts/pred.jsonl  scores/frames.csv  export/
//! scores/contact.csv  subsets.csv  hps.csv
//! samples/<split>.csv  summaries/<command>.json
//! ```

pub mod commands;
pub mod config;
pub mod evaluate;
pub mod files;
pub mod label;
pub mod manifest;
pub mod run;
pub mod sample;
pub mod synth;

pub use commands::{cmd_annotate, cmd_export, cmd_fit};
pub use config::PipelineConfig;
pub use evaluate::{cmd_evaluate, Tables};
pub use manifest::{DatasetManifest, Split};
pub use run::Workspace;
pub use sample::{cmd_sample, sample_training_pairs, TrainingPair};
pub use synth::cmd_synth;
