use anyhow::Result;
use log::warn;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::files::write_csv;
use crate::manifest::{DatasetManifest, SequenceEntry, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrainingPair<'a> {
    pub sequence: &'a str,
    pub frame: usize,
    pub view: usize,
}

/// Every other frame; per frame the moving view plus one random static
/// view, or two random static views when nothing moves.
fn sample_sequence<'a>(seq: &'a SequenceEntry, rng: &mut ChaCha8Rng) -> Vec<TrainingPair<'a>> {
    let statics: Vec<usize> = (0..seq.camera_count).filter(|&v| Some(v) != seq.moving_view).collect();
    let wanted = if seq.moving_view.is_some() { 1 } else { 2 };
    if statics.len() < wanted {
        warn!("sequence {}: only {} static view(s), sampling fewer pairs", seq.id, statics.len());
    }
    let mut out = Vec::new();
    for frame in (seq.frames.0..seq.frames.1).step_by(2) {
        let mut views: Vec<usize> = seq.moving_view.into_iter().collect();
        views.extend(statics.choose_multiple(rng, wanted));
        views.sort_unstable();
        out.extend(views.into_iter().map(|view| TrainingPair { sequence: &seq.id, frame, view }));
    }
    out
}

/// Training pairs of `split`, deterministic per seed. Each sequence draws
/// from its own stream, indexed by manifest position.
pub fn sample_training_pairs(manifest: &DatasetManifest, split: Split, seed: u64) -> Vec<TrainingPair<'_>> {
    manifest
        .sequences
        .iter()
        .enumerate()
        .filter(|(_, s)| s.split == split)
        .flat_map(|(k, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            sample_sequence(s, &mut rng)
        })
        .collect()
}

/// Writes `samples/<split>.csv` with columns `sequence,frame,view`.
pub fn cmd_sample<'a>(
    root: &std::path::Path,
    manifest: &'a DatasetManifest,
    split: Split,
    seed: u64,
) -> Result<Vec<TrainingPair<'a>>> {
    let pairs = sample_training_pairs(manifest, split, seed);
    write_csv(&root.join("samples").join(format!("{split}.csv")), &pairs)?;
    Ok(pairs)
}
