//! Multi-source shortest paths on the mesh edge graph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::mesh::Mesh;
use crate::error::{Error, Result};

/// Vertex adjacency with Euclidean edge lengths.
#[derive(Debug, Clone)]
pub struct EdgeGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl EdgeGraph {
    pub fn from_mesh(mesh: &Mesh) -> Self {
        let mut adjacency = vec![Vec::new(); mesh.vertex_count()];
        for (a, b, len) in mesh.edges() {
            adjacency[a].push((b, len));
            adjacency[b].push((a, len));
        }
        Self { adjacency }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Distance from the nearest source to every vertex; unreachable
    /// vertices get `+inf`.
    pub fn distances(&self, sources: &[usize]) -> Result<Vec<f64>> {
        if sources.is_empty() {
            return Err(Error::NoSources);
        }
        let n = self.adjacency.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            if s >= n {
                return Err(Error::IndexOutOfRange {
                    what: "geodesic source",
                    index: s,
                    len: n,
                });
            }
            dist[s] = 0.0;
            heap.push(Entry { dist: 0.0, vertex: s });
        }
        while let Some(Entry { dist: d, vertex: u }) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adjacency[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry { dist: nd, vertex: v });
                }
            }
        }
        Ok(dist)
    }
}

pub fn geodesic_distances(mesh: &Mesh, sources: &[usize]) -> Result<Vec<f64>> {
    EdgeGraph::from_mesh(mesh).distances(sources)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    vertex: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    #[test]
    fn source_has_zero_distance() {
        let m = Mesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let d = geodesic_distances(&m, &[2]).unwrap();
        assert_eq!(d[2], 0.0);
        assert!((d[0] - 1.0).abs() < 1e-15);
        assert!((d[1] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_edge_length() {
        let l = 0.37;
        let m = Mesh::new(
            vec![Vec3::zeros(), Vec3::new(l, 0.0, 0.0), Vec3::new(0.0, 5.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!((geodesic_distances(&m, &[0]).unwrap()[1] - l).abs() < 1e-15);
    }

    #[test]
    fn unreachable_component_is_infinite() {
        let m = Mesh::new(
            vec![
                Vec3::zeros(),
                Vec3::x(),
                Vec3::y(),
                Vec3::new(5.0, 0.0, 0.0),
                Vec3::new(6.0, 0.0, 0.0),
                Vec3::new(5.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let d = geodesic_distances(&m, &[0]).unwrap();
        assert!(d[3..].iter().all(|x| x.is_infinite()));
    }

    #[test]
    fn empty_sources_error() {
        let m = Mesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(geodesic_distances(&m, &[]), Err(Error::NoSources)));
    }
}
