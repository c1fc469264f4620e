//! Rigid and similarity registration from point correspondences.

use nalgebra::{Matrix3, SVD};
use serde::{Deserialize, Serialize};

use super::mesh::Vec3;
use crate::error::{Error, Result};

/// Proper rotation plus translation, `x ↦ R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RigidTransformRepr", into = "RigidTransformRepr")]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Validates orthonormality and `det = +1` to 1e-6.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let t = Self {
            rotation,
            translation,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let ortho = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        let det = self.rotation.determinant();
        if ortho > 1e-6 || (det - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(
                "rigid transform",
                format!("rotation is not proper (|RᵀR - I| = {ortho:.3e}, det = {det})"),
            ));
        }
        if !self.translation.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("rigid transform", "non-finite translation"));
        }
        Ok(())
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RigidTransformRepr {
    /// Row-major 3×3.
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl From<RigidTransform> for RigidTransformRepr {
    fn from(t: RigidTransform) -> Self {
        let r = &t.rotation;
        Self {
            rotation: [
                r[(0, 0)], r[(0, 1)], r[(0, 2)],
                r[(1, 0)], r[(1, 1)], r[(1, 2)],
                r[(2, 0)], r[(2, 1)], r[(2, 2)],
            ],
            translation: t.translation.into(),
        }
    }
}

impl TryFrom<RigidTransformRepr> for RigidTransform {
    type Error = Error;

    fn try_from(r: RigidTransformRepr) -> Result<Self> {
        RigidTransform::new(
            Matrix3::from_row_slice(&r.rotation),
            Vec3::from(r.translation),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidAlignment {
    pub transform: RigidTransform,
    /// Root-mean-square residual of the fitted correspondences, meters.
    pub rms: f64,
}

/// Similarity transform `x ↦ s·R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Similarity {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p * self.scale + self.translation
    }
}

/// Least-squares rotation and translation (no scale) mapping `src` onto
/// `dst`.
pub fn rigid_align(src: &[Vec3], dst: &[Vec3]) -> Result<RigidAlignment> {
    let fit = procrustes(src, dst, false)?;
    let transform = RigidTransform {
        rotation: fit.rotation,
        translation: fit.translation,
    };
    let rms = rms(src, dst, |p| transform.apply(p));
    Ok(RigidAlignment { transform, rms })
}

/// Least-squares similarity mapping `src` onto `dst` (Umeyama).
pub fn similarity_align(src: &[Vec3], dst: &[Vec3]) -> Result<Similarity> {
    procrustes(src, dst, true)
}

fn rms(src: &[Vec3], dst: &[Vec3], f: impl Fn(&Vec3) -> Vec3) -> f64 {
    let sum: f64 = src
        .iter()
        .zip(dst)
        .map(|(s, d)| (f(s) - d).norm_squared())
        .sum();
    (sum / src.len() as f64).sqrt()
}

fn procrustes(src: &[Vec3], dst: &[Vec3], with_scale: bool) -> Result<Similarity> {
    if src.len() != dst.len() {
        return Err(Error::DimensionMismatch {
            field: "correspondences",
            expected: src.len(),
            actual: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(Error::DegenerateCorrespondences);
    }
    let n = src.len() as f64;
    let mu_s = src.iter().sum::<Vec3>() / n;
    let mu_d = dst.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    let mut src_scatter = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let a = s - mu_s;
        let b = d - mu_d;
        cov += b * a.transpose();
        src_scatter += a * a.transpose();
        var_s += a.norm_squared();
    }
    cov /= n;
    var_s /= n;

    // collinear (or coincident) source points leave rotation about the line free
    let spread = src_scatter.symmetric_eigenvalues();
    let mut ev: Vec<f64> = spread.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if ev[0] <= 0.0 || ev[1] <= ev[0] * 1e-12 {
        return Err(Error::DegenerateCorrespondences);
    }

    let svd = SVD::new(cov, true, true);
    let u = svd.u.ok_or(Error::DegenerateCorrespondences)?;
    let v_t = svd.v_t.ok_or(Error::DegenerateCorrespondences)?;
    let mut sign = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        sign[(2, 2)] = -1.0;
    }
    let rotation = u * sign * v_t;
    let scale = if with_scale {
        let trace: f64 = (0..3).map(|k| svd.singular_values[k] * sign[(k, k)]).sum();
        trace / var_s
    } else {
        1.0
    };
    let translation = mu_d - rotation * mu_s * scale;
    Ok(Similarity {
        scale,
        rotation,
        translation,
    })
}
