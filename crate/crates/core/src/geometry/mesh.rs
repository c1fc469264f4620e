use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Indexed triangle mesh in meters with area-weighted vertex normals.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    vertex_normals: Vec<Vec3>,
}

impl Mesh {
    /// Builds a mesh, validating face indices and computing normals.
    ///
    /// Inconsistent face orientation is logged, not rejected.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for f in &faces {
            for &i in f {
                if i >= n {
                    return Err(Error::IndexOutOfRange {
                        what: "face vertex",
                        index: i,
                        len: n,
                    });
                }
            }
        }
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("mesh", format!("non-finite vertex {v:?}")));
        }
        let vertex_normals = compute_vertex_normals(&vertices, &faces);
        let mesh = Self {
            vertices,
            faces,
            vertex_normals,
        };
        if !mesh.is_consistently_oriented() {
            log::warn!("mesh faces are not consistently oriented");
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_normals(&self) -> &[Vec3] {
        &self.vertex_normals
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unit geometric normal of a face, or zero for degenerate faces.
    pub fn face_normal(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a)).try_normalize(0.0).unwrap_or_else(Vec3::zeros)
    }

    /// Returns a new mesh with every vertex mapped through `f`.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Self> {
        Self::new(self.vertices.iter().map(f).collect(), self.faces.clone())
    }

    /// Every interior edge is traversed in opposite directions by its two
    /// faces. Non-manifold edges (three or more faces) fail the check.
    pub fn is_consistently_oriented(&self) -> bool {
        let mut directed: HashMap<(usize, usize), u32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let e = (f[k], f[(k + 1) % 3]);
                if e.0 == e.1 {
                    continue;
                }
                let count = directed.entry(e).or_insert(0);
                *count += 1;
                if *count > 1 {
                    return false;
                }
            }
        }
        true
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    /// Undirected edge list with Euclidean lengths, each edge once.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut seen = std::collections::BTreeSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if a != b {
                    seen.insert((a.min(b), a.max(b)));
                }
            }
        }
        seen.into_iter()
            .map(|(a, b)| (a, b, (self.vertices[a] - self.vertices[b]).norm()))
            .collect()
    }
}

/// Area-weighted average of incident face normals. Zero-area faces are
/// skipped; vertices with no valid incident face get `+z`.
pub fn compute_vertex_normals(vertices: &[Vec3], faces: &[[usize; 3]]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); vertices.len()];
    for &[a, b, c] in faces {
        // cross product magnitude is twice the area, so this is area weighting
        let n = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]));
        if n.norm_squared() <= f64::MIN_POSITIVE {
            continue;
        }
        acc[a] += n;
        acc[b] += n;
        acc[c] += n;
    }
    acc.into_iter()
        .map(|n| n.try_normalize(1e-300).unwrap_or_else(Vec3::z))
        .collect()
}
