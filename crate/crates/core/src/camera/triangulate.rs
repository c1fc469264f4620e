use nalgebra::{Matrix3x4, Matrix4, RowVector4, SVD};

use super::pinhole::{Camera, Pixel};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Sine of the smallest accepted angle between the two viewing rays.
const MIN_RAY_SINE: f64 = 1e-6;

/// Linear (DLT) two-view triangulation in normalized image coordinates.
pub fn triangulate_pair(cam_a: &Camera, obs_a: &Pixel, cam_b: &Camera, obs_b: &Pixel) -> Result<Vec3> {
    let baseline = (cam_a.center() - cam_b.center()).norm();
    let ray_a = cam_a.ray_direction(obs_a);
    let ray_b = cam_b.ray_direction(obs_b);
    if baseline < 1e-9 || ray_a.cross(&ray_b).norm() < MIN_RAY_SINE {
        return Err(Error::DegenerateBaseline);
    }
    let mut a = Matrix4::zeros();
    for (row, (cam, obs)) in [(cam_a, obs_a), (cam_b, obs_b)].into_iter().enumerate() {
        let p = projection(cam);
        let n = cam.normalize(obs);
        a.set_row(2 * row, &(p.row(2) * n.x - p.row(0)));
        a.set_row(2 * row + 1, &(p.row(2) * n.y - p.row(1)));
    }
    // unit-normalize rows so both views weigh the same
    for r in 0..4 {
        let norm = a.row(r).norm();
        if norm > 0.0 {
            let row: RowVector4<f64> = a.row(r) / norm;
            a.set_row(r, &row);
        }
    }
    let svd = SVD::new(a, false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateBaseline)?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .unwrap();
    let h = v_t.row(imin);
    if h[3].abs() < 1e-12 {
        return Err(Error::DegenerateBaseline);
    }
    Ok(Vec3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]))
}

/// `[R | t]`, the projection in normalized image coordinates.
fn projection(cam: &Camera) -> Matrix3x4<f64> {
    let mut p = Matrix3x4::zeros();
    p.fixed_view_mut::<3, 3>(0, 0).copy_from(&cam.extrinsics.rotation);
    p.fixed_view_mut::<3, 1>(0, 3).copy_from(&cam.extrinsics.translation);
    p
}
