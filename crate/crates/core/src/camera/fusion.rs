use nalgebra::{Matrix4, Quaternion, UnitQuaternion, Vector4};

use crate::body::BodyParams;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Averages several pose estimates of the same body: per-joint chordal
/// quaternion mean, arithmetic mean for translation, shape and hand pose.
pub fn fuse_pose_estimates(estimates: &[BodyParams]) -> Result<BodyParams> {
    let first = estimates.first().ok_or(Error::Empty("pose estimates"))?;
    for e in &estimates[1..] {
        if e.pose.len() != first.pose.len() {
            return Err(Error::DimensionMismatch { field: "pose", expected: first.pose.len(), actual: e.pose.len() });
        }
        if e.shape.len() != first.shape.len() {
            return Err(Error::DimensionMismatch { field: "shape", expected: first.shape.len(), actual: e.shape.len() });
        }
        if e.hand_pose.len() != first.hand_pose.len()
            || e.hand_pose.iter().zip(&first.hand_pose).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::DimensionMismatch { field: "hand_pose", expected: first.hand_pose.len(), actual: e.hand_pose.len() });
        }
    }
    if estimates.len() == 1 {
        return Ok(first.clone());
    }
    let n = estimates.len() as f64;
    let mut fused = first.clone();
    fused.translation = estimates.iter().map(|e| e.translation).sum::<Vec3>() / n;
    for (k, s) in fused.shape.iter_mut().enumerate() {
        *s = estimates.iter().map(|e| e.shape[k]).sum::<f64>() / n;
    }
    for (h, z) in fused.hand_pose.iter_mut().enumerate() {
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = estimates.iter().map(|e| e.hand_pose[h][i]).sum::<f64>() / n;
        }
    }
    for (j, p) in fused.pose.iter_mut().enumerate() {
        let quats: Vec<UnitQuaternion<f64>> = estimates
            .iter()
            .map(|e| UnitQuaternion::from_scaled_axis(e.pose[j]))
            .collect();
        *p = average_rotations(&quats).scaled_axis();
    }
    Ok(fused)
}

/// Chordal L2 mean: principal eigenvector of `Σ q qᵀ`, sign-aligned with the
/// first rotation.
pub fn average_rotations(quats: &[UnitQuaternion<f64>]) -> UnitQuaternion<f64> {
    let mut m = Matrix4::zeros();
    for q in quats {
        let v: Vector4<f64> = q.into_inner().coords;
        m += v * v.transpose();
    }
    let eig = m.symmetric_eigen();
    let (imax, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let mut v: Vector4<f64> = eig.eigenvectors.column(imax).into_owned();
    if v.dot(&quats[0].into_inner().coords) < 0.0 {
        v = -v;
    }
    UnitQuaternion::from_quaternion(Quaternion::from(v))
}
