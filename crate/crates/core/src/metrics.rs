//! Contact detection scores, on-mesh geodesic error, body reconstruction
//! errors and subset aggregation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::contact::ContactVector;
use crate::error::{Error, Result};
use crate::geometry::rigid::similarity_align;
use crate::geometry::{EdgeGraph, Mesh, Vec3};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

fn check_pair(pred: &ContactVector, gt: &ContactVector) -> Result<()> {
    if pred.topology != gt.topology {
        return Err(Error::TopologyMismatch(pred.topology.clone(), gt.topology.clone()));
    }
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch { field: "contact labels", expected: gt.len(), actual: pred.len() });
    }
    Ok(())
}

pub fn contact_counts(pred: &ContactVector, gt: &ContactVector) -> Result<Counts> {
    check_pair(pred, gt)?;
    let mut c = Counts::default();
    for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

/// Precision, recall and F1 from counts. Both sets empty scores (1, 1, 1);
/// exactly one empty set scores (0, 0, 0).
pub fn prf_from_counts(c: Counts) -> (f64, f64, f64) {
    let pred = c.tp + c.fp;
    let gt = c.tp + c.fn_;
    match (pred, gt) {
        (0, 0) => return (1.0, 1.0, 1.0),
        (0, _) | (_, 0) => return (0.0, 0.0, 0.0),
        _ => {}
    }
    let p = c.tp as f64 / pred as f64;
    let r = c.tp as f64 / gt as f64;
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f1)
}

pub fn contact_prf(pred: &ContactVector, gt: &ContactVector) -> Result<(f64, f64, f64)> {
    Ok(prf_from_counts(contact_counts(pred, gt)?))
}

fn label_set(c: &ContactVector) -> Vec<usize> {
    c.labels.iter().enumerate().filter_map(|(i, &l)| l.then_some(i)).collect()
}

/// Mean geodesic distance from each predicted contact vertex to the nearest
/// ground-truth contact vertex, over a prebuilt edge graph. `None` when
/// either set is empty (the frame is excluded).
pub fn geodesic_error_on_graph(pred: &ContactVector, gt: &ContactVector, graph: &EdgeGraph) -> Result<Option<f64>> {
    check_pair(pred, gt)?;
    if graph.vertex_count() != gt.len() {
        return Err(Error::DimensionMismatch { field: "mesh vertices", expected: gt.len(), actual: graph.vertex_count() });
    }
    let sources = label_set(gt);
    let targets = label_set(pred);
    if sources.is_empty() || targets.is_empty() {
        return Ok(None);
    }
    let dist = graph.distances(&sources)?;
    Ok(Some(targets.iter().map(|&v| dist[v]).sum::<f64>() / targets.len() as f64))
}

/// [`geodesic_error_on_graph`] on the edge graph of `mesh`.
pub fn contact_geodesic_error(pred: &ContactVector, gt: &ContactVector, mesh: &Mesh) -> Result<Option<f64>> {
    if mesh.vertex_count() == 0 {
        return Err(Error::EmptyGeometry);
    }
    geodesic_error_on_graph(pred, gt, &EdgeGraph::from_mesh(mesh))
}

/// Contact scores of one frame or an aggregate of frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Metres; `None` when no frame had both sets non-empty.
    pub geodesic_error: Option<f64>,
    pub counts: Counts,
    pub frames_evaluated: usize,
    /// Frames left out of the geodesic mean.
    pub geodesic_excluded: usize,
}

pub fn score_frame(pred: &ContactVector, gt: &ContactVector, graph: &EdgeGraph) -> Result<ContactScore> {
    let counts = contact_counts(pred, gt)?;
    let (precision, recall, f1) = prf_from_counts(counts);
    let geodesic_error = geodesic_error_on_graph(pred, gt, graph)?;
    Ok(ContactScore {
        precision,
        recall,
        f1,
        geodesic_error,
        counts,
        frames_evaluated: 1,
        geodesic_excluded: usize::from(geodesic_error.is_none()),
    })
}

/// Macro average: every frame's precision, recall and F1 weigh equally;
/// geodesic error averages over the frames where it is defined.
pub fn aggregate(frames: &[ContactScore]) -> Result<ContactScore> {
    if frames.is_empty() {
        return Err(Error::Empty("scores"));
    }
    let n: usize = frames.iter().map(|f| f.frames_evaluated).sum();
    let mean = |g: fn(&ContactScore) -> f64| {
        frames.iter().map(|f| g(f) * f.frames_evaluated as f64).sum::<f64>() / n as f64
    };
    let geo_frames: usize = frames.iter().map(|f| f.frames_evaluated - f.geodesic_excluded).sum();
    let geodesic_error = (geo_frames > 0).then(|| {
        frames
            .iter()
            .filter_map(|f| f.geodesic_error.map(|g| g * (f.frames_evaluated - f.geodesic_excluded) as f64))
            .sum::<f64>()
            / geo_frames as f64
    });
    Ok(ContactScore {
        precision: mean(|f| f.precision),
        recall: mean(|f| f.recall),
        f1: mean(|f| f.f1),
        geodesic_error,
        counts: frames.iter().fold(Counts::default(), |a, f| Counts {
            tp: a.tp + f.counts.tp,
            fp: a.fp + f.counts.fp,
            fn_: a.fn_ + f.counts.fn_,
        }),
        frames_evaluated: n,
        geodesic_excluded: n - geo_frames,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlignMode {
    /// Similarity (Procrustes) alignment.
    #[serde(rename = "PA")]
    Procrustes,
    /// Pelvis translation only.
    #[serde(rename = "TR")]
    Pelvis,
}

impl AlignMode {
    pub fn prefix(self) -> &'static str {
        match self {
            AlignMode::Procrustes => "PA",
            AlignMode::Pelvis => "TR",
        }
    }
}

fn mean_error_mm(pred: &[Vec3], gt: &[Vec3], mode: AlignMode, pelvis: (Vec3, Vec3)) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch { field: "points", expected: gt.len(), actual: pred.len() });
    }
    if pred.is_empty() {
        return Err(Error::Empty("points"));
    }
    let aligned: Vec<Vec3> = match mode {
        AlignMode::Procrustes => {
            let s = similarity_align(pred, gt)?;
            pred.iter().map(|p| s.apply(p)).collect()
        }
        AlignMode::Pelvis => {
            let shift = pelvis.1 - pelvis.0;
            pred.iter().map(|p| p + shift).collect()
        }
    };
    Ok(aligned.iter().zip(gt).map(|(a, b)| (a - b).norm()).sum::<f64>() / pred.len() as f64 * 1000.0)
}

/// Mean per-joint position error in millimetres (inputs in metres).
pub fn mpjpe(pred: &[Vec3], gt: &[Vec3], mode: AlignMode, pelvis: usize) -> Result<f64> {
    let (p, g) = match (pred.get(pelvis), gt.get(pelvis)) {
        (Some(p), Some(g)) => (*p, *g),
        _ => return Err(Error::IndexOutOfRange { what: "pelvis joint", index: pelvis, len: gt.len().min(pred.len()) }),
    };
    mean_error_mm(pred, gt, mode, (p, g))
}

/// Vertex-to-vertex error in millimetres; TR alignment uses the given
/// pelvis locations.
pub fn v2v(pred: &[Vec3], gt: &[Vec3], mode: AlignMode, pred_pelvis: Vec3, gt_pelvis: Vec3) -> Result<f64> {
    mean_error_mm(pred, gt, mode, (pred_pelvis, gt_pelvis))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpsScore {
    pub mpjpe: f64,
    pub v2v: f64,
    pub alignment: AlignMode,
}

/// Whether the evaluated method saw similar scene, interaction and subject
/// data during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeenFlags {
    pub scene: bool,
    pub hsi: bool,
    pub subject: bool,
}

/// Rows of the generalisation table, keyed by seen-flags. `Other` holds the
/// two flag combinations without a lettered row; `Full` is the whole set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subset {
    A,
    B,
    C,
    D,
    E,
    F,
    Other(bool, bool, bool),
    Full,
}

impl Subset {
    pub fn of(flags: SeenFlags) -> Subset {
        match (flags.scene, flags.hsi, flags.subject) {
            (false, true, true) => Subset::A,
            (true, true, false) => Subset::B,
            (true, false, false) => Subset::C,
            (false, true, false) => Subset::D,
            (false, false, true) => Subset::E,
            (false, false, false) => Subset::F,
            (s, h, u) => Subset::Other(s, h, u),
        }
    }

    pub fn flags(self) -> Option<SeenFlags> {
        let (scene, hsi, subject) = match self {
            Subset::A => (false, true, true),
            Subset::B => (true, true, false),
            Subset::C => (true, false, false),
            Subset::D => (false, true, false),
            Subset::E => (false, false, true),
            Subset::F => (false, false, false),
            Subset::Other(s, h, u) => (s, h, u),
            Subset::Full => return None,
        };
        Some(SeenFlags { scene, hsi, subject })
    }

    /// Lettered rows in table order, then the full set.
    pub const TABLE: [Subset; 7] = [Subset::A, Subset::B, Subset::C, Subset::D, Subset::E, Subset::F, Subset::Full];
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subset::A => f.write_str("a"),
            Subset::B => f.write_str("b"),
            Subset::C => f.write_str("c"),
            Subset::D => f.write_str("d"),
            Subset::E => f.write_str("e"),
            Subset::F => f.write_str("f"),
            Subset::Full => f.write_str("g"),
            Subset::Other(s, h, u) => {
                let m = |b: &bool| if *b { "seen" } else { "unseen" };
                write!(f, "scene-{}_hsi-{}_subject-{}", m(s), m(h), m(u))
            }
        }
    }
}

impl FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "a" => Subset::A,
            "b" => Subset::B,
            "c" => Subset::C,
            "d" => Subset::D,
            "e" => Subset::E,
            "f" => Subset::F,
            "g" | "full" => Subset::Full,
            other => {
                let parse = |part: Option<&str>, key: &str| -> Option<bool> {
                    match part?.strip_prefix(key)? {
                        "seen" => Some(true),
                        "unseen" => Some(false),
                        _ => None,
                    }
                };
                let mut it = other.split('_');
                match (parse(it.next(), "scene-"), parse(it.next(), "hsi-"), parse(it.next(), "subject-"), it.next()) {
                    (Some(a), Some(b), Some(c), None) => Subset::of(SeenFlags { scene: a, hsi: b, subject: c }),
                    _ => return Err(Error::invalid("subset", format!("unknown subset tag {other:?}"))),
                }
            }
        })
    }
}

/// One aggregated row of the generalisation table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetRow {
    pub subset: Subset,
    pub score: ContactScore,
}

/// Macro-averaged scores per subset, lettered rows first, then any extra
/// flag combinations present, then the full set. Subsets without frames
/// are omitted.
pub fn aggregate_scores(frames: &[(ContactScore, SeenFlags)]) -> Result<Vec<SubsetRow>> {
    if frames.is_empty() {
        return Err(Error::Empty("scores"));
    }
    let mut subsets: Vec<Subset> = frames.iter().map(|(_, f)| Subset::of(*f)).collect();
    subsets.sort();
    subsets.dedup();
    let mut rows = Vec::new();
    for subset in subsets {
        let chosen: Vec<ContactScore> = frames.iter().filter(|(_, f)| Subset::of(*f) == subset).map(|(s, _)| *s).collect();
        rows.push(SubsetRow { subset, score: aggregate(&chosen)? });
    }
    let all: Vec<ContactScore> = frames.iter().map(|(s, _)| *s).collect();
    rows.push(SubsetRow { subset: Subset::Full, score: aggregate(&all)? });
    Ok(rows)
}
