use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Result};
use hsc_core::metrics::SeenFlags;
use serde::{Deserialize, Serialize};

use crate::files::{read_json, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => bail!("unknown split {other:?}; expected train, val or test"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEntry {
    pub id: String,
    /// Scan mesh, PLY or OBJ.
    pub mesh: PathBuf,
    pub correspondences: PathBuf,
}

/// Per-sequence files, relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceEntry {
    pub id: String,
    pub scene_id: String,
    pub subject_ids: Vec<String>,
    pub hsi_tag: String,
    pub split: Split,
    /// Relative to the training split; required for test sequences.
    #[serde(default)]
    pub seen: Option<SeenFlags>,
    /// First frame and one past the last.
    pub frames: (usize, usize),
    pub fps: u32,
    /// Index of a view whose noisy keypoints were deliberately displaced.
    #[serde(default)]
    pub corrupted_view: Option<usize>,
    /// Index of a hand-held, moving view, if any.
    #[serde(default)]
    pub moving_view: Option<usize>,
    pub camera_count: usize,
}

impl SequenceEntry {
    pub fn frame_count(&self) -> usize {
        self.frames.1.saturating_sub(self.frames.0)
    }

    pub fn dir(&self) -> PathBuf {
        Path::new("sequences").join(&self.id)
    }

    pub fn cameras(&self) -> PathBuf {
        self.dir().join("cameras").join("cameras.json")
    }

    pub fn keypoints(&self, file: &str) -> PathBuf {
        self.dir().join("keypoints").join(file)
    }

    /// Per-frame single-view pose estimates used to initialise fitting.
    pub fn estimates(&self) -> PathBuf {
        self.dir().join("keypoints").join("estimates.jsonl")
    }

    pub fn gt_params(&self) -> PathBuf {
        self.dir().join("gt").join("params.jsonl")
    }

    pub fn gt_contacts(&self) -> PathBuf {
        self.dir().join("gt").join("contacts.jsonl")
    }

    pub fn fit(&self) -> PathBuf {
        self.dir().join("fits").join("fit.json")
    }

    pub fn contacts(&self) -> PathBuf {
        self.dir().join("contacts").join("pred.jsonl")
    }

    pub fn scores(&self) -> PathBuf {
        self.dir().join("scores").join("frames.csv")
    }

    pub fn export_dir(&self) -> PathBuf {
        self.dir().join("export")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    /// Body model file, relative to the dataset root.
    pub model: PathBuf,
    pub scenes: Vec<SceneEntry>,
    pub sequences: Vec<SequenceEntry>,
}

impl DatasetManifest {
    /// Alignment of a scene, computed from its correspondences.
    pub fn alignment(scene_id: &str) -> PathBuf {
        Path::new("scenes").join(scene_id).join("alignment.json")
    }

    pub fn scene(&self, id: &str) -> Result<&SceneEntry> {
        match self.scenes.iter().find(|s| s.id == id) {
            Some(s) => Ok(s),
            None => bail!("unknown scene {id:?}"),
        }
    }

    /// Seen-flags of every non-training sequence, from the scenes, HSI tags
    /// and subjects that occur in the training split.
    pub fn assign_seen_flags(&mut self) {
        let train = self.sequences.iter().filter(|s| s.split == Split::Train);
        let mut scenes = HashSet::new();
        let mut hsi = HashSet::new();
        let mut subjects = HashSet::new();
        for s in train {
            scenes.insert(s.scene_id.clone());
            hsi.insert(s.hsi_tag.clone());
            subjects.extend(s.subject_ids.iter().cloned());
        }
        for s in self.sequences.iter_mut() {
            s.seen = (s.split != Split::Train).then(|| SeenFlags {
                scene: scenes.contains(&s.scene_id),
                hsi: hsi.contains(&s.hsi_tag),
                subject: s.subject_ids.iter().all(|u| subjects.contains(u)),
            });
        }
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for s in &self.scenes {
            if !ids.insert(("scene", s.id.as_str())) {
                bail!("duplicate scene id {:?}", s.id);
            }
        }
        for s in &self.sequences {
            if !ids.insert(("sequence", s.id.as_str())) {
                bail!("duplicate sequence id {:?}", s.id);
            }
            if s.id.is_empty() || s.id.contains(['/', '\\']) {
                bail!("sequence id {:?} is not a plain name", s.id);
            }
            self.scene(&s.scene_id)?;
            if s.split == Split::Test && s.seen.is_none() {
                bail!("test sequence {:?} has no seen-flags", s.id);
            }
            if s.frame_count() == 0 {
                bail!("sequence {:?} has no frames", s.id);
            }
            for (what, view) in [("corrupted_view", s.corrupted_view), ("moving_view", s.moving_view)] {
                if view.is_some_and(|v| v >= s.camera_count) {
                    bail!("sequence {:?}: {what} out of range", s.id);
                }
            }
        }
        Ok(())
    }

    /// Loads `manifest.json` from `root` and checks that every referenced
    /// input file exists.
    pub fn load(root: &Path) -> Result<Self> {
        let m: Self = read_json(&root.join(MANIFEST_FILE))?;
        m.validate()?;
        let mut required = vec![m.model.clone()];
        for s in &m.scenes {
            required.push(s.mesh.clone());
            required.push(s.correspondences.clone());
        }
        for s in &m.sequences {
            required.push(s.cameras());
        }
        for p in required {
            if !root.join(&p).is_file() {
                bail!("manifest references missing file {}", p.display());
            }
        }
        Ok(m)
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        self.validate()?;
        write_json(&root.join(MANIFEST_FILE), self)
    }

    pub fn sequences_in(&self, split: Split) -> impl Iterator<Item = &SequenceEntry> {
        self.sequences.iter().filter(move |s| s.split == split)
    }
}
