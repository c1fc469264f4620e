//! Score tables. Layouts:
//!
//! * `scores/contact.csv`: `method,precision,recall,f1,geodesic_cm`
//! * `scores/subsets.csv`: `subset,scene,hsi,subject,precision,recall,f1,geodesic_cm`
//! * `scores/hps.csv`: `condition,alignment,mpjpe_mm,v2v_mm,frames`
//! * `sequences/<id>/scores/frames.csv`: per-frame contact scores.

use anyhow::{bail, Result};
use hsc_core::body::humanoid::PELVIS;
use hsc_core::body::{BodyParams, Region};
use hsc_core::contact::{load_labels, ContactVector};
use hsc_core::geometry::geodesic::EdgeGraph;
use hsc_core::metrics::{aggregate, aggregate_scores, mpjpe, score_frame, v2v, AlignMode, ContactScore, SeenFlags, Subset};
use hsc_core::Execution;
use log::info;
use serde::Serialize;

use crate::commands::{read_fit, scenes_for, selected};
use crate::files::{read_jsonl, write_csv, write_json};
use crate::label::label_frames;
use crate::manifest::{SequenceEntry, Split};
use crate::run::Workspace;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactRow {
    pub method: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub geodesic_cm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetTableRow {
    pub subset: String,
    /// `seen` / `unseen`; empty on the full-set row.
    pub scene: String,
    pub hsi: String,
    pub subject: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub geodesic_cm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HpsRow {
    /// `scene_contact` or `no_scene_contact`; foot contact does not count.
    pub condition: String,
    pub alignment: String,
    pub mpjpe_mm: Option<f64>,
    pub v2v_mm: Option<f64>,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct FrameRow {
    frame: usize,
    precision: f64,
    recall: f64,
    f1: f64,
    geodesic_cm: Option<f64>,
    tp: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub contact: ContactRow,
    pub subsets: Vec<SubsetTableRow>,
    pub hps: Vec<HpsRow>,
}

struct SequenceScores {
    frames: Vec<ContactScore>,
    flags: SeenFlags,
    /// `(has scene contact, TR/PA errors)` per frame, when a fit exists.
    hps: Vec<(bool, [(f64, f64); 2])>,
}

const ALIGNMENTS: [AlignMode; 2] = [AlignMode::Pelvis, AlignMode::Procrustes];

fn scene_contact(gt: &ContactVector, regions: &[Region]) -> bool {
    gt.labels
        .iter()
        .zip(regions)
        .any(|(&c, r)| c && !matches!(r, Region::Foot | Region::FootSole))
}

fn flag(b: bool) -> String {
    if b { "seen" } else { "unseen" }.into()
}

/// Scores the predicted contact (and the fit, when present) of every
/// sequence in `split`, optionally restricted to one subset.
pub fn cmd_evaluate(ws: &Workspace, split: Split, subset: Option<Subset>) -> Result<Tables> {
    let seqs: Vec<&SequenceEntry> = selected(ws, split)
        .into_iter()
        .filter(|s| match (subset, s.seen) {
            (None | Some(Subset::Full), _) => true,
            (Some(want), Some(flags)) => Subset::of(flags) == want,
            (Some(_), None) => false,
        })
        .collect();
    if seqs.is_empty() {
        bail!("no {split} sequences to evaluate");
    }
    let needs_labels: Vec<&SequenceEntry> = seqs.iter().copied().filter(|s| !ws.path(s.contacts()).is_file()).collect();
    let scenes = scenes_for(ws, &needs_labels)?;
    let graph = EdgeGraph::from_mesh(&ws.model.template_mesh()?);
    let per_seq = ws.for_each(&seqs, |seq| {
        let Some(flags) = seq.seen else { bail!("no seen-flags") };
        let gt = load_labels(&ws.path(seq.gt_contacts()))?;
        let fit = ws.path(seq.fit()).is_file().then(|| read_fit(ws, seq)).transpose()?;
        let pred = if ws.path(seq.contacts()).is_file() {
            load_labels(&ws.path(seq.contacts()))?
        } else if let Some(fit) = &fit {
            let scene = &scenes[&seq.scene_id];
            label_frames(&ws.model, &fit.frames, &scene.bvh, &scene.align, &ws.cfg.contact, Execution::Sequential)?
        } else {
            bail!("neither contact labels nor a fit to label");
        };
        if pred.len() != gt.len() {
            bail!("{} predicted frames for {} ground-truth frames", pred.len(), gt.len());
        }
        let frames = pred.iter().zip(&gt).map(|(p, g)| score_frame(p, g, &graph)).collect::<hsc_core::Result<Vec<_>>>()?;
        let rows: Vec<FrameRow> = frames
            .iter()
            .enumerate()
            .map(|(t, s)| FrameRow {
                frame: seq.frames.0 + t,
                precision: s.precision,
                recall: s.recall,
                f1: s.f1,
                geodesic_cm: s.geodesic_error.map(|g| g * 100.0),
                tp: s.counts.tp,
                fp: s.counts.fp,
                fn_: s.counts.fn_,
            })
            .collect();
        write_csv(&ws.path(seq.scores()), &rows)?;

        let mut hps = Vec::new();
        let gt_params = ws.path(seq.gt_params());
        if let (Some(fit), true) = (&fit, gt_params.is_file()) {
            let truth: Vec<BodyParams> = read_jsonl(&gt_params)?;
            if truth.len() != fit.len() {
                bail!("{} ground-truth poses for {} fitted frames", truth.len(), fit.len());
            }
            for ((p, g), labels) in fit.frames.iter().zip(&truth).zip(&gt) {
                let (bp, bg) = (ws.model.pose_body(p)?, ws.model.pose_body(g)?);
                let mut errs = [(0.0, 0.0); 2];
                for (e, mode) in errs.iter_mut().zip(ALIGNMENTS) {
                    *e = (
                        mpjpe(&bp.joints, &bg.joints, mode, PELVIS)?,
                        v2v(&bp.vertices, &bg.vertices, mode, bp.joints[PELVIS], bg.joints[PELVIS])?,
                    );
                }
                hps.push((scene_contact(labels, ws.model.regions()), errs));
            }
        }
        Ok(SequenceScores { frames, flags, hps })
    })?;

    let all: Vec<ContactScore> = per_seq.iter().flat_map(|s| s.frames.iter().copied()).collect();
    let overall = aggregate(&all)?;
    let contact = ContactRow {
        method: ws.cfg.method.clone(),
        precision: overall.precision,
        recall: overall.recall,
        f1: overall.f1,
        geodesic_cm: overall.geodesic_error.map(|g| g * 100.0),
    };
    let tagged: Vec<(ContactScore, SeenFlags)> =
        per_seq.iter().flat_map(|s| s.frames.iter().map(move |f| (*f, s.flags))).collect();
    let subsets: Vec<SubsetTableRow> = aggregate_scores(&tagged)?
        .into_iter()
        .map(|row| {
            let flags = row.subset.flags();
            SubsetTableRow {
                subset: row.subset.to_string(),
                scene: flags.map(|f| flag(f.scene)).unwrap_or_default(),
                hsi: flags.map(|f| flag(f.hsi)).unwrap_or_default(),
                subject: flags.map(|f| flag(f.subject)).unwrap_or_default(),
                precision: row.score.precision,
                recall: row.score.recall,
                f1: row.score.f1,
                geodesic_cm: row.score.geodesic_error.map(|g| g * 100.0),
            }
        })
        .collect();
    let mut hps = Vec::new();
    for (condition, with_contact) in [("scene_contact", true), ("no_scene_contact", false)] {
        for (k, mode) in ALIGNMENTS.iter().enumerate() {
            let errs: Vec<(f64, f64)> = per_seq
                .iter()
                .flat_map(|s| s.hps.iter())
                .filter(|(c, _)| *c == with_contact)
                .map(|(_, e)| e[k])
                .collect();
            let n = errs.len();
            let mean = |f: fn(&(f64, f64)) -> f64| (n > 0).then(|| errs.iter().map(f).sum::<f64>() / n as f64);
            hps.push(HpsRow {
                condition: condition.into(),
                alignment: mode.prefix().into(),
                mpjpe_mm: mean(|e| e.0),
                v2v_mm: mean(|e| e.1),
                frames: n,
            });
        }
    }
    write_csv(&ws.path("scores/contact.csv"), std::slice::from_ref(&contact))?;
    write_csv(&ws.path("scores/subsets.csv"), &subsets)?;
    write_csv(&ws.path("scores/hps.csv"), &hps)?;
    write_json(
        &ws.path("summaries/evaluate.json"),
        &serde_json::json!({
            "split": split.to_string(),
            "subset": subset.map(|s| s.to_string()),
            "frames": overall.frames_evaluated,
            "geodesic_excluded": overall.geodesic_excluded,
            "contact": &contact,
        }),
    )?;
    info!(
        "evaluate: {} frames, F1 {:.3}, geodesic {}",
        overall.frames_evaluated,
        contact.f1,
        contact.geodesic_cm.map_or("n/a".into(), |g| format!("{g:.2} cm"))
    );
    Ok(Tables { contact, subsets, hps })
}
