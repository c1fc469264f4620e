use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use hsc_core::body::BodyParams;
use hsc_core::camera::{fuse_pose_estimates, Camera, KeypointSet};
use hsc_core::contact::{load_labels, save_labels};
use hsc_core::fitting::{fit_batch, FitResult, Weighting};
use hsc_core::geometry::io::{contact_colors, save_ply, PlyEncoding};
use hsc_core::geometry::Mesh;
use hsc_core::Execution;
use log::{info, warn};
use serde::Serialize;

use crate::config::WeightingMode;
use crate::files::{read_json, read_jsonl, write_json, write_jsonl};
use crate::label::{label_frames, load_scene, LoadedScene};
use crate::manifest::{SequenceEntry, Split};
use crate::run::Workspace;

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub sequence: String,
    pub frames: usize,
    pub converged: usize,
    pub total_energy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelSummary {
    pub sequence: String,
    pub frames: usize,
    pub contact_vertices: usize,
}

pub(crate) fn selected(ws: &Workspace, split: Split) -> Vec<&SequenceEntry> {
    ws.manifest.sequences_in(split).collect()
}

pub fn read_fit(ws: &Workspace, seq: &SequenceEntry) -> Result<FitResult> {
    let fit: FitResult = read_json(&ws.path(seq.fit()))?;
    if fit.len() != seq.frame_count() {
        bail!("fit has {} frames, manifest says {}", fit.len(), seq.frame_count());
    }
    Ok(fit)
}

/// Fits every sequence of `split` and writes `fits/fit.json`.
pub fn cmd_fit(ws: &Workspace, split: Split) -> Result<Vec<FitSummary>> {
    let weighting = match ws.cfg.weighting {
        WeightingMode::Consensus => Weighting::Consensus(ws.cfg.consensus),
        WeightingMode::Uniform => Weighting::Uniform,
    };
    let summaries = ws.for_each(&selected(ws, split), |seq| {
        let cams: Vec<Camera> = read_json(&ws.path(seq.cameras()))?;
        let keypoints: Vec<KeypointSet> = read_jsonl(&ws.path(seq.keypoints(ws.cfg.keypoints.file_name())))?;
        let estimates: Vec<Vec<BodyParams>> = read_jsonl(&ws.path(seq.estimates()))?;
        if keypoints.len() != seq.frame_count() || estimates.len() != seq.frame_count() {
            bail!(
                "expected {} frames, found {} keypoint and {} estimate records",
                seq.frame_count(),
                keypoints.len(),
                estimates.len()
            );
        }
        let inits = estimates
            .iter()
            .enumerate()
            .map(|(t, e)| fuse_pose_estimates(e).with_context(|| format!("frame {t}: fusing estimates")))
            .collect::<Result<Vec<_>>>()?;
        let fit = fit_batch(&ws.model, &cams, &keypoints, &inits, &ws.cfg.energy, &weighting, Execution::Sequential)?;
        for (t, ok) in fit.converged.iter().enumerate() {
            if !ok {
                warn!("{} frame {t}: solver stopped before converging", seq.id);
            }
        }
        write_json(&ws.path(seq.fit()), &fit)?;
        let summary = FitSummary {
            sequence: seq.id.clone(),
            frames: fit.len(),
            converged: fit.converged.iter().filter(|&&c| c).count(),
            total_energy: fit.total_energy(),
        };
        info!("fit {}: {}/{} frames converged", seq.id, summary.converged, summary.frames);
        Ok(summary)
    })?;
    write_json(&ws.path("summaries/fit.json"), &summaries)?;
    Ok(summaries)
}

/// Every scene used by `seqs`, loaded once.
pub(crate) fn scenes_for(ws: &Workspace, seqs: &[&SequenceEntry]) -> Result<BTreeMap<String, LoadedScene>> {
    let mut scenes = BTreeMap::new();
    for s in seqs {
        if !scenes.contains_key(&s.scene_id) {
            let loaded = load_scene(ws.root(), ws.manifest.scene(&s.scene_id)?)?;
            scenes.insert(s.scene_id.clone(), loaded);
        }
    }
    Ok(scenes)
}

/// Labels contact for every fitted sequence of `split` and writes
/// `contacts/pred.jsonl`.
pub fn cmd_annotate(ws: &Workspace, split: Split) -> Result<Vec<LabelSummary>> {
    let seqs = selected(ws, split);
    let scenes = scenes_for(ws, &seqs)?;
    let summaries = ws.for_each(&seqs, |seq| {
        let fit = read_fit(ws, seq)?;
        let scene = &scenes[&seq.scene_id];
        let labels = label_frames(&ws.model, &fit.frames, &scene.bvh, &scene.align, &ws.cfg.contact, Execution::Sequential)?;
        save_labels(&ws.path(seq.contacts()), &labels)?;
        let summary = LabelSummary {
            sequence: seq.id.clone(),
            frames: labels.len(),
            contact_vertices: labels.iter().map(|l| l.count()).sum(),
        };
        info!("annotate {}: {} contact vertices over {} frames", seq.id, summary.contact_vertices, summary.frames);
        Ok(summary)
    })?;
    write_json(&ws.path("summaries/annotate.json"), &summaries)?;
    Ok(summaries)
}

/// Writes one colored PLY per frame: fitted body in scan coordinates,
/// contact vertices green.
pub fn cmd_export(ws: &Workspace, split: Split) -> Result<Vec<LabelSummary>> {
    let seqs = selected(ws, split);
    let scenes = scenes_for(ws, &seqs)?;
    let summaries = ws.for_each(&seqs, |seq| {
        let fit = read_fit(ws, seq)?;
        let labels = load_labels(&ws.path(seq.contacts()))?;
        if labels.len() != fit.len() {
            bail!("{} label frames for {} fitted frames", labels.len(), fit.len());
        }
        let align = &scenes[&seq.scene_id].align;
        let mut files = Vec::new();
        for (t, (p, c)) in fit.frames.iter().zip(&labels).enumerate() {
            let posed = ws.model.pose_body(p)?;
            let mesh = Mesh::new(posed.vertices.iter().map(|v| align.apply(v)).collect(), ws.model.faces().to_vec())?;
            let name = format!("frame_{:05}.ply", seq.frames.0 + t);
            save_ply(&mesh, &ws.path(seq.export_dir().join(&name)), Some(&contact_colors(&c.labels)), PlyEncoding::Ascii)?;
            files.push(name);
        }
        write_jsonl(&ws.path(seq.export_dir().join("files.jsonl")), &files)?;
        Ok(LabelSummary {
            sequence: seq.id.clone(),
            frames: files.len(),
            contact_vertices: labels.iter().map(|l| l.count()).sum(),
        })
    })?;
    write_json(&ws.path("summaries/export.json"), &summaries)?;
    Ok(summaries)
}
