use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use hsc_core::body::BodyParams;
use hsc_core::contact::{load_labels, save_labels};
use hsc_core::metrics::Subset;
use hsc_core::Execution;
use hsc_pipeline::config::SynthConfig;
use hsc_pipeline::files::read_jsonl;
use hsc_pipeline::label::{label_frames, load_scene};
use hsc_pipeline::manifest::SequenceEntry;
use hsc_pipeline::{
    cmd_annotate, cmd_evaluate, cmd_export, cmd_fit, cmd_synth, sample_training_pairs, DatasetManifest,
    PipelineConfig, Split, Workspace,
};
use sha2::{Digest, Sha256};

fn small(root: &Path) -> PipelineConfig {
    PipelineConfig {
        output: root.to_path_buf(),
        synth: SynthConfig { walk_frames: 8, sit_frames: 6, train_frames: 4, ..Default::default() },
        ..Default::default()
    }
}

/// SHA-256 of every file below `root`, keyed by relative path.
fn digest_tree(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let hash = Sha256::digest(std::fs::read(&path).unwrap());
                let key = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(key, hash.iter().map(|b| format!("{b:02x}")).collect());
            }
        }
    }
    out
}

#[test]
fn unknown_config_keys_are_named() {
    let err = PipelineConfig::from_toml("seed = 1\n[energy]\nlambda_posee = 2.0\n").unwrap_err();
    assert!(format!("{err:#}").contains("lambda_posee"), "{err:#}");
    let err = PipelineConfig::from_toml("sed = 1\n").unwrap_err();
    assert!(format!("{err:#}").contains("sed"));
    let cfg = PipelineConfig::from_toml("seed = 7\n[synth]\ncameras = 6\n").unwrap();
    assert_eq!((cfg.seed, cfg.synth.cameras), (7, 6));
}

#[test]
fn invalid_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("out");
    let mut cfg = small(&root);
    cfg.synth.cameras = 3;
    assert!(cmd_synth(&cfg).is_err());
    assert!(!root.exists());
    let mut cfg = small(&root);
    cfg.contact.threshold_body = -1.0;
    assert!(cmd_synth(&cfg).is_err());
    assert!(!root.exists());
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_synth(&small(a.path())).unwrap();
    cmd_synth(&small(b.path())).unwrap();
    assert_eq!(digest_tree(a.path()), digest_tree(b.path()));
    let mut other = small(c.path());
    other.seed = 1;
    cmd_synth(&other).unwrap();
    assert_ne!(digest_tree(a.path()), digest_tree(c.path()));
}

#[test]
fn ground_truth_labels_are_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let manifest = cmd_synth(&cfg).unwrap();
    let ws = Workspace::open(cfg, 1).unwrap();
    let scene = load_scene(dir.path(), &manifest.scenes[0]).unwrap();
    for seq in &manifest.sequences {
        let params: Vec<BodyParams> = read_jsonl(&dir.path().join(seq.gt_params())).unwrap();
        let relabelled =
            label_frames(&ws.model, &params, &scene.bvh, &scene.align, &ws.cfg.contact, Execution::Parallel).unwrap();
        assert_eq!(relabelled, load_labels(&dir.path().join(seq.gt_contacts())).unwrap(), "{}", seq.id);
        assert!(relabelled.iter().all(|l| l.count() > 0), "{}: frame without contact", seq.id);
    }
}

#[test]
fn corrupted_view_is_flagged_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.synth.corrupt_view = Some(2);
    cmd_synth(&cfg).unwrap();
    let m = DatasetManifest::load(dir.path()).unwrap();
    assert!(m.sequences.iter().all(|s| s.corrupted_view == Some(2)));
    let seq = &m.sequences[1];
    let clean: Vec<hsc_core::camera::KeypointSet> = read_jsonl(&dir.path().join(seq.keypoints("clean.jsonl"))).unwrap();
    let noisy: Vec<hsc_core::camera::KeypointSet> = read_jsonl(&dir.path().join(seq.keypoints("noisy.jsonl"))).unwrap();
    for (c, n) in clean.iter().zip(&noisy) {
        for view in 0..4 {
            let shift: f64 = (0..24).map(|j| (c.get(view, j).uv - n.get(view, j).uv).norm()).sum::<f64>() / 24.0;
            if view == 2 {
                assert!((shift - 80.0).abs() < 5.0, "{shift}");
            } else {
                assert!(shift < 5.0, "{shift}");
            }
        }
    }
}

#[test]
fn manifest_round_trips_and_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let m = cmd_synth(&small(dir.path())).unwrap();
    assert_eq!(DatasetManifest::load(dir.path()).unwrap(), m);

    let mut dup = m.clone();
    dup.sequences.push(dup.sequences[0].clone());
    assert!(dup.validate().is_err());
    let mut unflagged = m.clone();
    unflagged.sequences[1].seen = None;
    assert!(unflagged.validate().is_err());
    let mut missing = m.clone();
    missing.model = "nowhere.json".into();
    missing.save(dir.path()).unwrap();
    assert!(DatasetManifest::load(dir.path()).is_err());
}

#[test]
fn seen_flags_follow_the_training_split() {
    let dir = tempfile::tempdir().unwrap();
    let m = cmd_synth(&small(dir.path())).unwrap();
    let by_id = |id: &str| m.sequences.iter().find(|s| s.id == id).unwrap();
    assert_eq!(by_id("train-walk").seen, None);
    // Same scene and interaction as training, new subject.
    assert_eq!(Subset::of(by_id("walk").seen.unwrap()), Subset::B);
    assert_eq!(Subset::of(by_id("sit").seen.unwrap()), Subset::C);
}

#[test]
fn end_to_end_recovers_contact_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    cmd_synth(&cfg).unwrap();
    let ws = Workspace::open(cfg.clone(), 1).unwrap();
    cmd_fit(&ws, Split::Test).unwrap();
    let first = digest_tree(&dir.path().join("sequences"));
    cmd_fit(&ws, Split::Test).unwrap();
    assert_eq!(first, digest_tree(&dir.path().join("sequences")));
    // Sequence-level parallelism does not change results.
    cmd_fit(&Workspace::open(cfg, 2).unwrap(), Split::Test).unwrap();
    assert_eq!(first, digest_tree(&dir.path().join("sequences")));

    cmd_annotate(&ws, Split::Test).unwrap();
    let tables = cmd_evaluate(&ws, Split::Test, None).unwrap();
    assert!(tables.contact.f1 >= 0.95, "{:?}", tables.contact);
    assert!(tables.contact.geodesic_cm.unwrap() <= 2.0);
    assert!(tables.hps.iter().all(|r| r.frames == 0 || r.mpjpe_mm.unwrap() < 5.0));

    let exported = cmd_export(&ws, Split::Test).unwrap();
    let walk = ws.manifest.sequences.iter().find(|s| s.id == "walk").unwrap();
    assert_eq!(exported[0].frames, walk.frame_count());
    let (mesh, colors) =
        hsc_core::geometry::io::load_ply_with_colors(&dir.path().join(walk.export_dir()).join("frame_00000.ply")).unwrap();
    assert_eq!(mesh.vertex_count(), ws.model.vertex_count());
    assert!(colors.unwrap().contains(&hsc_core::geometry::io::CONTACT_COLOR));
}

#[test]
fn evaluating_ground_truth_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let m = cmd_synth(&cfg).unwrap();
    for seq in m.sequences_in(Split::Test) {
        let gt = load_labels(&dir.path().join(seq.gt_contacts())).unwrap();
        save_labels(&dir.path().join(seq.contacts()), &gt).unwrap();
    }
    let ws = Workspace::open(cfg, 1).unwrap();
    let t = cmd_evaluate(&ws, Split::Test, None).unwrap();
    assert_eq!((t.contact.precision, t.contact.recall, t.contact.f1), (1.0, 1.0, 1.0));
    assert_eq!(t.contact.geodesic_cm, Some(0.0));
    // Without fits there are no body errors to report.
    assert!(t.hps.iter().all(|r| r.frames == 0 && r.mpjpe_mm.is_none()));

    let only_c = cmd_evaluate(&ws, Split::Test, Some(Subset::C)).unwrap();
    let subsets: Vec<&str> = only_c.subsets.iter().map(|r| r.subset.as_str()).collect();
    assert_eq!(subsets, ["c", "g"]);
}

#[test]
fn tables_have_the_published_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    cmd_synth(&cfg).unwrap();
    let ws = Workspace::open(cfg, 1).unwrap();
    cmd_fit(&ws, Split::Test).unwrap();
    cmd_evaluate(&ws, Split::Test, None).unwrap();
    let read = |name: &str| std::fs::read_to_string(dir.path().join("scores").join(name)).unwrap();
    let contact = read("contact.csv");
    let subsets = read("subsets.csv");
    let hps = read("hps.csv");
    assert_eq!(contact.lines().next(), Some("method,precision,recall,f1,geodesic_cm"));
    assert_eq!(contact.lines().count(), 2);
    assert_eq!(subsets.lines().next(), Some("subset,scene,hsi,subject,precision,recall,f1,geodesic_cm"));
    let tags: Vec<&str> = subsets.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(tags, ["b", "c", "g"]);
    assert!(subsets.lines().nth(1).unwrap().starts_with("b,seen,seen,unseen,"));
    assert!(subsets.lines().last().unwrap().starts_with("g,,,,"));
    assert_eq!(hps.lines().next(), Some("condition,alignment,mpjpe_mm,v2v_mm,frames"));
    let rows: Vec<String> = hps.lines().skip(1).map(|l| l.split(',').take(2).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(rows, ["scene_contact,TR", "scene_contact,PA", "no_scene_contact,TR", "no_scene_contact,PA"]);
}

fn entry(id: &str, frames: usize, cameras: usize, moving: Option<usize>) -> SequenceEntry {
    SequenceEntry {
        id: id.into(),
        scene_id: "room".into(),
        subject_ids: vec!["s".into()],
        hsi_tag: "walk".into(),
        split: Split::Train,
        seen: None,
        frames: (0, frames),
        fps: 30,
        corrupted_view: None,
        moving_view: moving,
        camera_count: cameras,
    }
}

fn manifest(sequences: Vec<SequenceEntry>) -> DatasetManifest {
    DatasetManifest {
        model: "model.json".into(),
        scenes: vec![hsc_pipeline::manifest::SceneEntry {
            id: "room".into(),
            mesh: "scene.ply".into(),
            correspondences: "c.txt".into(),
        }],
        sequences,
    }
}

#[test]
fn sampling_takes_every_other_frame() {
    let m = manifest(vec![entry("a", 10, 4, None)]);
    let pairs = sample_training_pairs(&m, Split::Train, 3);
    let mut frames: Vec<usize> = pairs.iter().map(|p| p.frame).collect();
    frames.dedup();
    assert_eq!(frames, [0, 2, 4, 6, 8]);
    for f in frames {
        let views: Vec<usize> = pairs.iter().filter(|p| p.frame == f).map(|p| p.view).collect();
        assert_eq!(views.len(), 2);
        assert_ne!(views[0], views[1]);
    }
    assert_eq!(pairs, sample_training_pairs(&m, Split::Train, 3));
    assert_ne!(pairs, sample_training_pairs(&m, Split::Train, 4));
    assert!(sample_training_pairs(&m, Split::Test, 3).is_empty());
}

#[test]
fn sampling_pairs_the_moving_view_with_one_static() {
    let m = manifest(vec![entry("a", 9, 5, Some(3))]);
    let pairs = sample_training_pairs(&m, Split::Train, 0);
    for f in [0, 2, 4, 6, 8] {
        let views: Vec<usize> = pairs.iter().filter(|p| p.frame == f).map(|p| p.view).collect();
        assert_eq!(views.len(), 2);
        assert!(views.contains(&3));
    }
}

#[test]
fn sampling_with_a_single_view_degrades_to_one() {
    let m = manifest(vec![entry("a", 4, 1, None)]);
    let pairs = sample_training_pairs(&m, Split::Train, 0);
    assert_eq!(pairs.len(), 2);
    assert!(pairs.iter().all(|p| p.view == 0));
}

#[test]
fn cli_exits_nonzero_on_hard_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    let hsc = env!("CARGO_BIN_EXE_hsc");
    let out = Command::new(hsc).args(["--config", cfg.to_str().unwrap(), "synth"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let data = dir.path().join("data");
    std::fs::write(&cfg, format!("output = {:?}\n[synth]\nwalk_frames = 4\nsit_frames = 4\ntrain_frames = 4\n", data)).unwrap();
    let run = |args: &[&str]| Command::new(hsc).arg("--config").arg(&cfg).args(args).output().unwrap();
    // Nothing to fit before synth.
    assert_eq!(run(&["fit"]).status.code(), Some(1));
    assert!(run(&["synth"]).status.success());
    assert!(run(&["sample"]).status.success());
    assert!(data.join("samples/train.csv").is_file());
    assert_eq!(run(&["evaluate", "--subset", "zz"]).status.code(), Some(2));
    // No labels and no fits yet.
    assert_eq!(run(&["evaluate"]).status.code(), Some(1));
}
