//! Per-vertex contact classifier: a shared two-layer perceptron over
//! geometric vertex features, trained with binary cross entropy and
//! masked-vertex augmentation.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::body::{BodyModel, BodyParams};
use crate::contact::ContactVector;
use crate::error::{Error, Result};
use crate::geometry::io::write_atomic;
use crate::geometry::mesh::compute_vertex_normals;

/// Feature columns: position relative to the pelvis in the ground plane with
/// absolute height (3), vertex normal (3), template position (3), mask flag.
pub const FEATURE_DIM: usize = 10;
/// Positions enter in decimetres. In metres the contact boundary in height
/// is too shallow for fixed-step descent to sharpen within a few hundred
/// epochs.
pub const POSITION_SCALE: f64 = 10.0;
const MASK_COLUMN: usize = FEATURE_DIM - 1;
const CLAMP: f64 = 1e-7;

/// Row-per-vertex feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexFeatures {
    pub topology: String,
    pub values: DMatrix<f64>,
}

impl VertexFeatures {
    pub fn new(topology: impl Into<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("vertex features", "non-finite value"));
        }
        Ok(Self { topology: topology.into(), values })
    }

    pub fn from_body(model: &BodyModel, params: &BodyParams) -> Result<Self> {
        let posed = model.pose_body(params)?;
        let normals = compute_vertex_normals(&posed.vertices, model.faces());
        let pelvis = posed.joints[0];
        let values = DMatrix::from_fn(posed.vertices.len(), FEATURE_DIM, |v, c| match c {
            0 => (posed.vertices[v].x - pelvis.x) * POSITION_SCALE,
            1 => (posed.vertices[v].y - pelvis.y) * POSITION_SCALE,
            2 => posed.vertices[v].z * POSITION_SCALE,
            3..=5 => normals[v][c - 3],
            6..=8 => model.template()[v][c - 6],
            _ => 0.0,
        });
        Self::new(model.topology_name(), values)
    }

    pub fn vertex_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_masked(&self, v: usize) -> bool {
        self.values[(v, MASK_COLUMN)] != 0.0
    }

    pub fn masked_count(&self) -> usize {
        (0..self.vertex_count()).filter(|&v| self.is_masked(v)).count()
    }

    /// Zeroes the features of `vertices` and raises their mask flag.
    pub fn mask(&mut self, vertices: impl IntoIterator<Item = usize>) {
        for v in vertices {
            self.values.row_mut(v).fill(0.0);
            self.values[(v, MASK_COLUMN)] = 1.0;
        }
    }
}

/// Masks exactly `⌊fraction · V⌋` vertices chosen uniformly with `seed`.
pub fn mvm_mask(features: &VertexFeatures, fraction: f64, seed: u64) -> Result<VertexFeatures> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::invalid("mask fraction", format!("{fraction} outside [0, 1)")));
    }
    let n = features.vertex_count();
    let k = (fraction * n as f64).floor() as usize;
    let mut out = features.clone();
    if k > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        out.mask(index::sample(&mut rng, n, k));
    }
    Ok(out)
}

fn clamp(p: f64) -> f64 {
    p.clamp(CLAMP, 1.0 - CLAMP)
}

/// Mean binary cross entropy, probabilities clamped to `[1e-7, 1 − 1e-7]`.
pub fn bce_loss(p: &[f64], c: &ContactVector) -> Result<f64> {
    if p.len() != c.len() {
        return Err(Error::DimensionMismatch { field: "probabilities", expected: c.len(), actual: p.len() });
    }
    if p.is_empty() {
        return Err(Error::Empty("probabilities"));
    }
    let total: f64 = p
        .iter()
        .zip(&c.labels)
        .map(|(&p, &l)| {
            let p = clamp(p);
            if l { -p.ln() } else { -(1.0 - p).ln() }
        })
        .sum();
    Ok(total / p.len() as f64)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Vertices per descent step.
    pub batch: usize,
    /// Fraction of vertices masked per training frame.
    pub mask_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { hidden: 64, learning_rate: 1e-2, epochs: 200, batch: 64, mask_fraction: 0.3, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch == 0 {
            return Err(Error::invalid("predictor config", "hidden and batch must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("predictor config", "learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.mask_fraction) {
            return Err(Error::invalid("predictor config", "mask_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Shared per-vertex perceptron `D → H (ReLU) → 1 (sigmoid)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DVector<f64>,
    pub b2: f64,
}

/// Parameter gradients, laid out like [`Classifier`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DVector<f64>,
    pub b2: f64,
}

impl Classifier {
    pub fn new(input: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n1 = Normal::new(0.0, (2.0 / input as f64).sqrt()).expect("positive std");
        let n2 = Normal::new(0.0, 1.0 / (hidden as f64).sqrt()).expect("positive std");
        Self {
            w1: DMatrix::from_fn(hidden, input, |_, _| n1.sample(&mut rng)),
            b1: DVector::zeros(hidden),
            w2: DVector::from_fn(hidden, |_, _| n2.sample(&mut rng)),
            b2: 0.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    fn check(&self, x: &VertexFeatures) -> Result<()> {
        if x.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch { field: "feature dimension", expected: self.input_dim(), actual: x.dim() });
        }
        Ok(())
    }

    /// Logit of one vertex; fills `h` with the hidden activations.
    fn forward(&self, x: &[f64], w1t: &[f64], h: &mut [f64]) -> f64 {
        let d = x.len();
        let mut z = self.b2;
        for (k, hk) in h.iter_mut().enumerate() {
            let w = &w1t[k * d..(k + 1) * d];
            let a = self.b1[k] + w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
            *hk = a.max(0.0);
            z += self.w2[k] * *hk;
        }
        z
    }

    /// First-layer weights, one contiguous row per hidden unit.
    fn w1_rows(&self) -> Vec<f64> {
        self.w1.transpose().as_slice().to_vec()
    }

    pub fn logits(&self, x: &VertexFeatures) -> Result<DVector<f64>> {
        self.check(x)?;
        let w1t = self.w1_rows();
        let rows = x.values.transpose();
        let mut h = vec![0.0; self.hidden_dim()];
        Ok(DVector::from_iterator(
            x.vertex_count(),
            rows.column_iter().map(|r| self.forward(r.as_slice(), &w1t, &mut h)),
        ))
    }

    pub fn probabilities(&self, x: &VertexFeatures) -> Result<Vec<f64>> {
        Ok(self.logits(x)?.iter().map(|&z| sigmoid(z)).collect())
    }

    /// BCE loss of one frame and its parameter gradients.
    pub fn loss_and_gradients(&self, x: &VertexFeatures, c: &ContactVector) -> Result<(f64, Gradients)> {
        self.check(x)?;
        if c.len() != x.vertex_count() {
            return Err(Error::DimensionMismatch { field: "contact labels", expected: x.vertex_count(), actual: c.len() });
        }
        let rows = x.values.transpose();
        let all: Vec<usize> = (0..c.len()).collect();
        Ok(self.batch_gradients(rows.as_slice(), &c.labels, &all))
    }

    /// Loss and gradients over the vertices `batch` of a row-major feature
    /// block.
    fn batch_gradients(&self, rows: &[f64], labels: &[bool], batch: &[usize]) -> (f64, Gradients) {
        let (d, hd) = (self.input_dim(), self.hidden_dim());
        let w1t = self.w1_rows();
        let mut g1 = vec![0.0; hd * d];
        let mut g = Gradients { w1: DMatrix::zeros(0, 0), b1: DVector::zeros(hd), w2: DVector::zeros(hd), b2: 0.0 };
        let mut h = vec![0.0; hd];
        let n = batch.len() as f64;
        let mut loss = 0.0;
        for &v in batch {
            let x = &rows[v * d..(v + 1) * d];
            let p = sigmoid(self.forward(x, &w1t, &mut h));
            let (pc, target) = (clamp(p), if labels[v] { 1.0 } else { 0.0 });
            loss -= if labels[v] { pc.ln() } else { (1.0 - pc).ln() };
            // The clamp is flat outside its range.
            if pc != p {
                continue;
            }
            let dz = (p - target) / n;
            g.b2 += dz;
            for k in 0..hd {
                if h[k] <= 0.0 {
                    continue;
                }
                g.w2[k] += dz * h[k];
                let da = dz * self.w2[k];
                g.b1[k] += da;
                for (gw, xv) in g1[k * d..(k + 1) * d].iter_mut().zip(x) {
                    *gw += da * xv;
                }
            }
        }
        g.w1 = DMatrix::from_row_slice(hd, d, &g1);
        (loss / n, g)
    }

    fn step(&mut self, g: &Gradients, lr: f64) {
        self.w1 -= &g.w1 * lr;
        self.b1 -= &g.b1 * lr;
        self.w2 -= &g.w2 * lr;
        self.b2 -= g.b2 * lr;
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let row = |v: &mut String, it: &mut dyn Iterator<Item = f64>| {
            let items: Vec<String> = it.map(|x| format!("{x:e}")).collect();
            let _ = writeln!(v, "{}", items.join(" "));
        };
        let mut s = String::new();
        let _ = writeln!(s, "classifier {} {}", self.input_dim(), self.hidden_dim());
        for k in 0..self.hidden_dim() {
            row(&mut s, &mut self.w1.row(k).iter().copied());
        }
        row(&mut s, &mut self.b1.iter().copied());
        row(&mut s, &mut self.w2.iter().copied());
        row(&mut s, &mut std::iter::once(self.b2));
        write_atomic(path, s.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let (d, hd) = match h.as_slice() {
            ["classifier", d, hd] => (
                d.parse::<usize>().map_err(|e| err(1, e.to_string()))?,
                hd.parse::<usize>().map_err(|e| err(1, e.to_string()))?,
            ),
            _ => return Err(err(1, "expected `classifier <input> <hidden>`".into())),
        };
        let mut next_row = |len: usize| -> Result<Vec<f64>> {
            let (i, l) = lines.next().ok_or_else(|| err(0, "unexpected end of file".into()))?;
            let vals = l
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| err(i + 1, e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != len {
                return Err(err(i + 1, format!("expected {len} values, found {}", vals.len())));
            }
            Ok(vals)
        };
        let mut w1 = DMatrix::zeros(hd, d);
        for k in 0..hd {
            w1.row_mut(k).copy_from_slice(&next_row(d)?);
        }
        let b1 = DVector::from_vec(next_row(hd)?);
        let w2 = DVector::from_vec(next_row(hd)?);
        let b2 = next_row(1)?[0];
        if let Some((i, _)) = lines.next() {
            return Err(err(i + 1, "trailing data".into()));
        }
        Ok(Self { w1, b1, w2, b2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
}

/// Trained weights plus the mean training loss of every epoch.
#[derive(Debug, Clone)]
pub struct Trained {
    pub classifier: Classifier,
    pub log: Vec<EpochLog>,
}

/// Fixed-step gradient descent on the BCE loss. Every epoch visits the
/// frames in a seeded random order, draws a fresh mask per frame and takes
/// one step per shuffled batch of its vertices.
pub fn train_classifier(data: &[(VertexFeatures, ContactVector)], cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    let Some((first, _)) = data.first() else {
        return Err(Error::Empty("training set"));
    };
    let dim = first.dim();
    for (x, c) in data {
        if x.dim() != dim {
            return Err(Error::DimensionMismatch { field: "feature dimension", expected: dim, actual: x.dim() });
        }
        if x.topology != c.topology {
            return Err(Error::TopologyMismatch(x.topology.clone(), c.topology.clone()));
        }
        if x.vertex_count() != c.len() {
            return Err(Error::DimensionMismatch { field: "contact labels", expected: x.vertex_count(), actual: c.len() });
        }
    }
    let mut clf = Classifier::new(dim, cfg.hidden, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (x, c) = &data[i];
            let x = if cfg.mask_fraction > 0.0 {
                mvm_mask(x, cfg.mask_fraction, rand::Rng::random(&mut rng))?
            } else {
                x.clone()
            };
            let rows = x.values.transpose();
            let mut verts: Vec<usize> = (0..x.vertex_count()).collect();
            verts.shuffle(&mut rng);
            let mut frame_loss = 0.0;
            for chunk in verts.chunks(cfg.batch) {
                let (loss, g) = clf.batch_gradients(rows.as_slice(), &c.labels, chunk);
                frame_loss += loss * chunk.len() as f64;
                clf.step(&g, cfg.learning_rate);
            }
            total += frame_loss / verts.len() as f64;
        }
        log.push(EpochLog { epoch, loss: total / data.len() as f64 });
    }
    Ok(Trained { classifier: clf, log })
}

/// Contact probabilities and labels `p ≥ 0.5`.
pub fn predict(clf: &Classifier, x: &VertexFeatures) -> Result<ContactVector> {
    ContactVector::from_probabilities(x.topology.clone(), clf.probabilities(x)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_spot_values() {
        let c = ContactVector::new("t", vec![true, false, true, false]);
        assert!((bce_loss(&[0.5; 4], &c).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(bce_loss(&[1.0, 0.0, 1.0, 0.0], &c).unwrap() < 1e-6);
        assert!(bce_loss(&[0.5; 3], &c).is_err());
    }

    #[test]
    fn mask_counts() {
        let x = VertexFeatures::new("t", DMatrix::from_fn(100, FEATURE_DIM, |_, c| if c == MASK_COLUMN { 0.0 } else { 0.5 })).unwrap();
        assert_eq!(mvm_mask(&x, 0.0, 1).unwrap(), x);
        let m = mvm_mask(&x, 0.3, 7).unwrap();
        assert_eq!(m.masked_count(), 30);
        assert_eq!(m, mvm_mask(&x, 0.3, 7).unwrap());
        assert!(mvm_mask(&x, 1.0, 7).is_err());
    }
}
