//! Median-split AABB tree over the triangles of a [`Mesh`].

use std::sync::Arc;

use super::mesh::{Mesh, Vec3};
use crate::error::{Error, Result};

pub const DEFAULT_LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let v = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d2 += v * v;
        }
        d2
    }
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, count: usize },
    Inner { left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub distance: f64,
    pub point: Vec3,
    pub face: usize,
    /// Unit geometric normal of `face` (zero for degenerate faces).
    pub normal: Vec3,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    mesh: Arc<Mesh>,
    nodes: Vec<Node>,
    order: Vec<usize>,
    leaf_size: usize,
}

impl Bvh {
    pub fn new(mesh: Arc<Mesh>) -> Result<Self> {
        Self::with_leaf_size(mesh, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(mesh: Arc<Mesh>, leaf_size: usize) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::EmptyGeometry);
        }
        let leaf_size = leaf_size.max(1);
        let centroids: Vec<Vec3> = (0..mesh.face_count())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                (a + b + c) / 3.0
            })
            .collect();
        let mut order: Vec<usize> = (0..mesh.face_count()).collect();
        let mut nodes = Vec::with_capacity(2 * mesh.face_count() / leaf_size + 1);
        build(&mesh, &centroids, &mut order, 0, leaf_size, &mut nodes);
        Ok(Self {
            mesh,
            nodes,
            order,
            leaf_size,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn shared_mesh(&self) -> Arc<Mesh> {
        Arc::clone(&self.mesh)
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn closest_point(&self, p: &Vec3) -> SurfacePoint {
        self.closest_point_counted(p).0
    }

    /// Closest point plus the number of triangles whose distance was
    /// evaluated. Ties on distance resolve to the lowest face index, so the
    /// result is identical to an exhaustive scan.
    pub fn closest_point_counted(&self, p: &Vec3) -> (SurfacePoint, usize) {
        let mut best = (f64::INFINITY, usize::MAX, Vec3::zeros());
        let mut touched = 0;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            if node.bounds.distance_squared(p) > best.0 {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &face in &self.order[start..start + count] {
                        touched += 1;
                        let [a, b, c] = self.mesh.triangle(face);
                        let q = closest_point_on_triangle(p, &a, &b, &c);
                        let d2 = (q - p).norm_squared();
                        if d2 < best.0 || (d2 == best.0 && face < best.1) {
                            best = (d2, face, q);
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = self.nodes[left].bounds.distance_squared(p);
                    let dr = self.nodes[right].bounds.distance_squared(p);
                    // nearer child popped first
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        let (d2, face, point) = best;
        (
            SurfacePoint {
                distance: d2.sqrt(),
                point,
                face,
                normal: self.mesh.face_normal(face),
            },
            touched,
        )
    }

    /// Checks the structural invariants: every triangle in exactly one leaf
    /// and every node box enclosing its triangles.
    pub fn validate(&self) -> bool {
        let mut seen = vec![0u32; self.mesh.face_count()];
        let ok = self.validate_node(0, &mut seen);
        ok && seen.iter().all(|&c| c == 1)
    }

    fn validate_node(&self, idx: usize, seen: &mut [u32]) -> bool {
        let node = &self.nodes[idx];
        let faces: Vec<usize> = self.collect_faces(idx);
        let inside = faces.iter().all(|&f| {
            self.mesh
                .triangle(f)
                .iter()
                .all(|v| node.bounds.contains(v))
        });
        match node.kind {
            NodeKind::Leaf { start, count } => {
                for &f in &self.order[start..start + count] {
                    seen[f] += 1;
                }
                inside
            }
            NodeKind::Inner { left, right } => {
                inside && self.validate_node(left, seen) && self.validate_node(right, seen)
            }
        }
    }

    fn collect_faces(&self, idx: usize) -> Vec<usize> {
        match self.nodes[idx].kind {
            NodeKind::Leaf { start, count } => self.order[start..start + count].to_vec(),
            NodeKind::Inner { left, right } => {
                let mut v = self.collect_faces(left);
                v.extend(self.collect_faces(right));
                v
            }
        }
    }
}

fn build(
    mesh: &Mesh,
    centroids: &[Vec3],
    order: &mut [usize],
    offset: usize,
    leaf_size: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &f in order.iter() {
        for v in mesh.triangle(f) {
            bounds.grow(&v);
        }
        cbounds.grow(&centroids[f]);
    }
    let idx = nodes.len();
    nodes.push(Node {
        bounds,
        kind: NodeKind::Leaf {
            start: offset,
            count: order.len(),
        },
    });
    if order.len() <= leaf_size {
        return idx;
    }
    let extent = cbounds.max - cbounds.min;
    let axis = extent.imax();
    let mid = order.len() / 2;
    // ties broken by face index so the build is deterministic
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build(mesh, centroids, lo, offset, leaf_size, nodes);
    let right = build(mesh, centroids, hi, offset + mid, leaf_size, nodes);
    nodes[idx].kind = NodeKind::Inner { left, right };
    idx
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let denom = d1 - d3;
        let v = if denom != 0.0 { d1 / denom } else { 0.0 };
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let denom = d2 - d6;
        let w = if denom != 0.0 { d2 / denom } else { 0.0 };
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let denom = (d4 - d3) + (d5 - d6);
        let w = if denom != 0.0 { (d4 - d3) / denom } else { 0.0 };
        return b + (c - b) * w;
    }
    let denom = va + vb + vc;
    if denom == 0.0 {
        // zero-area triangle: fall back to the closest of its edges
        return [(a, b), (b, c), (a, c)]
            .into_iter()
            .map(|(s, e)| closest_point_on_segment(p, s, e))
            .min_by(|x, y| (x - p).norm_squared().total_cmp(&(y - p).norm_squared()))
            .unwrap();
    }
    let v = vb / denom;
    let w = vc / denom;
    a + ab * v + ac * w
}

fn closest_point_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane_mesh() -> Arc<Mesh> {
        Arc::new(
            Mesh::new(
                vec![
                    Vec3::new(-1.0, -1.0, 0.0),
                    Vec3::new(1.0, -1.0, 0.0),
                    Vec3::new(1.0, 1.0, 0.0),
                    Vec3::new(-1.0, 1.0, 0.0),
                ],
                vec![[0, 1, 2], [0, 2, 3]],
            )
            .unwrap(),
        )
    }

    #[test]
    fn point_above_interior_projects_vertically() {
        let bvh = Bvh::new(plane_mesh()).unwrap();
        let sp = bvh.closest_point(&Vec3::new(0.3, -0.2, 0.7));
        assert!((sp.distance - 0.7).abs() < 1e-15);
        assert!((sp.point - Vec3::new(0.3, -0.2, 0.0)).norm() < 1e-15);
        assert!((sp.normal - Vec3::z()).norm() < 1e-15);
    }

    #[test]
    fn point_on_vertex_has_zero_distance() {
        let bvh = Bvh::new(plane_mesh()).unwrap();
        let sp = bvh.closest_point(&Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(sp.distance, 0.0);
    }

    #[test]
    fn empty_mesh_is_rejected() {
        let m = Arc::new(Mesh::new(vec![], vec![]).unwrap());
        assert!(matches!(Bvh::new(m), Err(Error::EmptyGeometry)));
    }

    #[test]
    fn triangle_primitive_agrees_with_dense_sampling() {
        // independent check of the Voronoi walk: sample the triangle densely
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.2, 0.1);
        let c = Vec3::new(0.3, 0.9, -0.2);
        for _ in 0..50 {
            let p = Vec3::new(
                rng.random_range(-1.0..2.0),
                rng.random_range(-1.0..2.0),
                rng.random_range(-1.0..1.0),
            );
            let q = closest_point_on_triangle(&p, &a, &b, &c);
            let n = 300;
            let mut best = f64::INFINITY;
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                    let s = a + (b - a) * u + (c - a) * v;
                    best = best.min((s - p).norm());
                }
            }
            let d = (q - p).norm();
            assert!(d <= best + 1e-12);
            assert!(best - d < 5e-3);
        }
    }
}
