//! Synthetic capture: a scanned room, scripted motions, calibrated views,
//! keypoints, single-view pose estimates and ground-truth contact.

use std::path::Path;
use std::sync::Arc;

use anyhow::Result;
use hsc_core::body::humanoid::{LEFT_SHOULDER, RIGHT_SHOULDER};
use hsc_core::body::{make_test_humanoid, BodyModel, BodyParams};
use hsc_core::camera::{Camera, Detection, KeypointSet};
use hsc_core::contact::save_labels;
use hsc_core::geometry::io::{save_mesh, MeshFormat};
use hsc_core::geometry::{grid_mesh, Bvh, Mesh, RigidTransform, Vec3};
use hsc_core::synthetic::{
    box_mesh, merge_meshes, perturb, place_on_floor, project_keypoints, ring_cameras, seat_under, sitting_pose,
    walking_pose,
};
use hsc_core::{rotation, Execution};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{KeypointVariant, PipelineConfig};
use crate::files::{write_correspondences, write_json, write_jsonl};
use crate::label::label_frames;
use crate::manifest::{DatasetManifest, SceneEntry, SequenceEntry, Split};

pub const SCENE_ID: &str = "room";
const SIT_SPOT: (f64, f64) = (1.0, 1.0);

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Script {
    id: &'static str,
    split: Split,
    hsi: &'static str,
    subject: &'static str,
    frames: Vec<BodyParams>,
}

fn walk(model: &BodyModel, shape: &[f64], start: Vec3, frames: usize) -> Result<Vec<BodyParams>> {
    (0..frames)
        .map(|t| {
            let mut p = walking_pose(model, std::f64::consts::TAU * t as f64 / 15.0);
            p.shape = shape.to_vec();
            p.translation = start + Vec3::y() * (0.04 * t as f64);
            Ok(place_on_floor(model, &p, 0.0)?)
        })
        .collect()
}

/// Seated at [`SIT_SPOT`] with the arms slowly swinging.
fn sit(model: &BodyModel, frames: usize) -> Result<Vec<BodyParams>> {
    let base = sitting_pose(model);
    (0..frames)
        .map(|t| {
            let mut p = base.clone();
            p.translation = Vec3::new(SIT_SPOT.0, SIT_SPOT.1, 0.0);
            let swing = 0.2 * (std::f64::consts::TAU * t as f64 / frames as f64).sin();
            for j in [LEFT_SHOULDER, RIGHT_SHOULDER] {
                p.pose[j] = rotation::log(&(rotation::exp(&(Vec3::x() * swing)) * rotation::exp(&p.pose[j])));
            }
            Ok(place_on_floor(model, &p, 0.0)?)
        })
        .collect()
}

/// Floor, a seat under the sitting spot and an untouched crate, in the
/// capture frame.
fn room(model: &BodyModel, seated: &BodyParams) -> Result<Mesh> {
    let floor = grid_mesh(41, 41, 0.1).map_vertices(|v| v - Vec3::new(2.0, 2.0, 0.0))?;
    let seat = seat_under(model, seated, 0.0)?;
    let obstacle = box_mesh(Vec3::new(-1.8, 1.2, 0.0), Vec3::new(-1.2, 1.8, 0.4));
    Ok(merge_meshes(&[floor, seat, obstacle])?)
}

/// Capture-to-scan transform: a turn about the vertical, a slight tilt and
/// an offset.
fn scan_transform(rng: &mut ChaCha8Rng) -> Result<RigidTransform> {
    let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let tilt = Vec3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), 0.0);
    let r = rotation::exp(&tilt) * rotation::exp(&(Vec3::z() * yaw));
    let t = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-0.5..0.5));
    Ok(RigidTransform::new(r, t)?)
}

fn corrupt(kp: &KeypointSet, view: usize, px: f64, rng: &mut ChaCha8Rng) -> Result<KeypointSet> {
    let mut views = kp.views.clone();
    for d in views[view].iter_mut() {
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        *d = Detection::new(d.uv.x + px * a.cos(), d.uv.y + px * a.sin(), d.confidence);
    }
    Ok(KeypointSet::new(views)?)
}

/// Writes the synthetic dataset below `cfg.output`. Output depends on
/// `cfg.seed` and `cfg.synth` only.
pub fn cmd_synth(cfg: &PipelineConfig) -> Result<DatasetManifest> {
    cfg.validate()?;
    let root = cfg.output.as_path();
    let s = &cfg.synth;
    let model = make_test_humanoid(0);
    model.save(&root.join("model.json"))?;

    let walker = [0.0, 0.0];
    let trainee = [0.6, -0.4];
    let scripts = [
        Script {
            id: "train-walk",
            split: Split::Train,
            hsi: "walk",
            subject: "s1",
            frames: walk(&model, &trainee, Vec3::new(-0.6, -1.2, 0.0), s.train_frames)?,
        },
        Script {
            id: "walk",
            split: Split::Test,
            hsi: "walk",
            subject: "s0",
            frames: walk(&model, &walker, Vec3::new(0.2, -1.2, 0.0), s.walk_frames)?,
        },
        Script { id: "sit", split: Split::Test, hsi: "sit", subject: "s0", frames: sit(&model, s.sit_frames)? },
    ];

    let mut rng = rng_for(cfg.seed, 0);
    let capture_room = room(&model, &scripts[2].frames[0])?;
    let to_scan = scan_transform(&mut rng)?;
    let scan = capture_room.map_vertices(|v| to_scan.apply(v))?;
    let scene_dir = Path::new("scenes").join(SCENE_ID);
    save_mesh(&scan, &root.join(scene_dir.join("scene.ply")), MeshFormat::Ply, None)?;
    let mut anchors: Vec<Vec3> = capture_room.vertices().iter().step_by(97).copied().collect();
    anchors.truncate(12);
    let noise = s.correspondence_noise;
    let scan_anchors: Vec<Vec3> = anchors
        .iter()
        .map(|a| to_scan.apply(a) + Vec3::from_fn(|_, _| if noise > 0.0 { rng.random_range(-noise..noise) } else { 0.0 }))
        .collect();
    write_correspondences(&root.join(scene_dir.join("correspondences.txt")), &anchors, &scan_anchors)?;
    let bvh = Bvh::new(Arc::new(scan))?;

    let mut sequences = Vec::new();
    for (k, script) in scripts.iter().enumerate() {
        let mut rng = rng_for(cfg.seed, k as u64 + 1);
        let entry = SequenceEntry {
            id: script.id.into(),
            scene_id: SCENE_ID.into(),
            subject_ids: vec![script.subject.into()],
            hsi_tag: script.hsi.into(),
            split: script.split,
            seen: None,
            frames: (0, script.frames.len()),
            fps: 30,
            corrupted_view: s.corrupt_view,
            moving_view: None,
            camera_count: s.cameras,
        };
        let centre = script.frames.iter().map(|p| p.translation).sum::<Vec3>() / script.frames.len() as f64;
        let cams: Vec<Camera> = ring_cameras(s.cameras, 4.0, 1.5, Vec3::new(centre.x, centre.y, 1.0))?;
        write_json(&root.join(entry.cameras()), &cams)?;

        let mut clean = Vec::new();
        let mut noisy = Vec::new();
        let mut estimates = Vec::new();
        for p in &script.frames {
            clean.push(project_keypoints(&model, p, &cams, 0.0, &mut rng)?);
            let mut kp = project_keypoints(&model, p, &cams, s.noise_px, &mut rng)?;
            if let Some(v) = s.corrupt_view {
                kp = corrupt(&kp, v, s.corruption_px, &mut rng)?;
            }
            noisy.push(kp);
            let per_view: Vec<BodyParams> = (0..s.estimates)
                .map(|_| perturb(p, &mut rng, s.estimate_noise_deg.to_radians(), 0.05))
                .collect();
            estimates.push(per_view);
        }
        write_jsonl(&root.join(entry.keypoints(KeypointVariant::Clean.file_name())), &clean)?;
        write_jsonl(&root.join(entry.keypoints(KeypointVariant::Noisy.file_name())), &noisy)?;
        write_jsonl(&root.join(entry.estimates()), &estimates)?;
        write_jsonl(&root.join(entry.gt_params()), &script.frames)?;
        let labels = label_frames(&model, &script.frames, &bvh, &to_scan, &cfg.contact, Execution::Sequential)?;
        save_labels(&root.join(entry.gt_contacts()), &labels)?;
        info!(
            "synth {}: {} frames, {} contact vertices",
            script.id,
            labels.len(),
            labels.iter().map(|l| l.count()).sum::<usize>()
        );
        sequences.push(entry);
    }

    let mut manifest = DatasetManifest {
        model: "model.json".into(),
        scenes: vec![SceneEntry {
            id: SCENE_ID.into(),
            mesh: scene_dir.join("scene.ply"),
            correspondences: scene_dir.join("correspondences.txt"),
        }],
        sequences,
    };
    manifest.assign_seen_flags();
    manifest.save(root)?;
    Ok(manifest)
}
