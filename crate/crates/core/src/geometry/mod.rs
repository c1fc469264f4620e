//! Mesh and geometry kernel.

pub mod bvh;
pub mod geodesic;
pub mod io;
pub mod mesh;
pub mod rigid;

pub use bvh::{Bvh, SurfacePoint};
pub use geodesic::{geodesic_distances, EdgeGraph};
pub use io::{load_mesh, save_mesh, MeshFormat, PlyEncoding};
pub use mesh::{Mesh, Vec3};
pub use rigid::{rigid_align, RigidAlignment, RigidTransform};

use crate::error::Result;

/// Distance, closest point, face and face normal for `p` against the BVH.
pub fn closest_surface_point(bvh: &Bvh, p: &Vec3) -> Result<SurfacePoint> {
    Ok(bvh.closest_point(p))
}

/// Regular `nx × ny` vertex grid in the z = 0 plane, triangulated with
/// consistent upward orientation.
pub fn grid_mesh(nx: usize, ny: usize, spacing: f64) -> Mesh {
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push(Vec3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
        }
    }
    let mut faces = Vec::new();
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let v = j * nx + i;
            faces.push([v, v + 1, v + nx + 1]);
            faces.push([v, v + nx + 1, v + nx]);
        }
    }
    Mesh::new(vertices, faces).expect("grid indices are in range")
}
