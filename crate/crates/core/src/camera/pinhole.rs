use nalgebra::{Matrix2x3, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};

pub type Pixel = Vector2<f64>;

/// Calibrated pinhole camera without distortion.
///
/// Serialized as `{name, fx, fy, cx, cy, R: [9 row-major], t: [3], width,
/// height}`; `R`, `t` map world points into the camera frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraRepr", into = "CameraRepr")]
pub struct Camera {
    pub name: String,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub extrinsics: RigidTransform,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn new(
        name: impl Into<String>,
        [fx, fy, cx, cy]: [f64; 4],
        extrinsics: RigidTransform,
        (width, height): (u32, u32),
    ) -> Result<Self> {
        let cam = Self {
            name: name.into(),
            fx,
            fy,
            cx,
            cy,
            extrinsics,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `eye` looking at `target`, with image `up` roughly along
    /// world `up`. Camera axes: x right, y down, z forward.
    pub fn look_at(
        name: impl Into<String>,
        intrinsics: [f64; 4],
        size: (u32, u32),
        eye: Vec3,
        target: Vec3,
        up: Vec3,
    ) -> Result<Self> {
        let z = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::invalid("camera", "eye coincides with target"))?;
        let x = z
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::invalid("camera", "view direction parallel to up"))?;
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let translation = -(rotation * eye);
        Self::new(name, intrinsics, RigidTransform::new(rotation, translation)?, size)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::invalid("camera", format!("{}: focal lengths must be positive", self.name)));
        }
        if !(self.cx >= 0.0 && self.cx <= self.width as f64 && self.cy >= 0.0 && self.cy <= self.height as f64) {
            return Err(Error::invalid("camera", format!("{}: principal point outside the image", self.name)));
        }
        self.extrinsics.validate()
    }

    pub fn center(&self) -> Vec3 {
        self.extrinsics.inverse().translation
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.extrinsics.apply(p)
    }

    pub fn project(&self, p: &Vec3) -> Result<Pixel> {
        let pc = self.to_camera(p);
        if pc.z <= 0.0 {
            return Err(Error::BehindCamera);
        }
        Ok(Pixel::new(self.fx * pc.x / pc.z + self.cx, self.fy * pc.y / pc.z + self.cy))
    }

    /// Projection and its 2×3 Jacobian with respect to the world point.
    pub fn project_with_jacobian(&self, p: &Vec3) -> Result<(Pixel, Matrix2x3<f64>)> {
        let pc = self.to_camera(p);
        if pc.z <= 0.0 {
            return Err(Error::BehindCamera);
        }
        let iz = 1.0 / pc.z;
        let uv = Pixel::new(self.fx * pc.x * iz + self.cx, self.fy * pc.y * iz + self.cy);
        let d = Matrix2x3::new(
            self.fx * iz, 0.0, -self.fx * pc.x * iz * iz,
            0.0, self.fy * iz, -self.fy * pc.y * iz * iz,
        );
        Ok((uv, d * self.extrinsics.rotation))
    }

    /// Normalized image coordinates `K⁻¹·[u, v, 1]`.
    pub fn normalize(&self, uv: &Pixel) -> Vector2<f64> {
        Vector2::new((uv.x - self.cx) / self.fx, (uv.y - self.cy) / self.fy)
    }

    /// World-frame unit direction of the ray through `uv`.
    pub fn ray_direction(&self, uv: &Pixel) -> Vec3 {
        let n = self.normalize(uv);
        (self.extrinsics.rotation.transpose() * Vec3::new(n.x, n.y, 1.0)).normalize()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraRepr {
    name: String,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    #[serde(rename = "R")]
    r: [f64; 9],
    t: [f64; 3],
    width: u32,
    height: u32,
}

impl From<Camera> for CameraRepr {
    fn from(c: Camera) -> Self {
        let r = c.extrinsics.rotation;
        Self {
            name: c.name,
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            r: [
                r[(0, 0)], r[(0, 1)], r[(0, 2)],
                r[(1, 0)], r[(1, 1)], r[(1, 2)],
                r[(2, 0)], r[(2, 1)], r[(2, 2)],
            ],
            t: c.extrinsics.translation.into(),
            width: c.width,
            height: c.height,
        }
    }
}

impl TryFrom<CameraRepr> for Camera {
    type Error = Error;

    fn try_from(r: CameraRepr) -> Result<Self> {
        let ext = RigidTransform::new(Matrix3::from_row_slice(&r.r), Vec3::from(r.t))?;
        Camera::new(r.name, [r.fx, r.fy, r.cx, r.cy], ext, (r.width, r.height))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin_cam() -> Camera {
        Camera::new("c", [1000.0, 1000.0, 500.0, 500.0], RigidTransform::identity(), (1000, 1000)).unwrap()
    }

    #[test]
    fn optical_axis_maps_to_principal_point() {
        let c = origin_cam();
        for z in [0.5, 3.0, 100.0] {
            assert_eq!(c.project(&Vec3::new(0.0, 0.0, z)).unwrap(), Pixel::new(500.0, 500.0));
        }
    }

    #[test]
    fn direct_formula() {
        let uv = origin_cam().project(&Vec3::new(0.1, 0.0, 1.0)).unwrap();
        assert!((uv - Pixel::new(600.0, 500.0)).norm() < 1e-12);
    }

    #[test]
    fn behind_camera_errors() {
        assert!(matches!(origin_cam().project(&Vec3::new(0.0, 0.0, -1.0)), Err(Error::BehindCamera)));
        assert!(matches!(origin_cam().project(&Vec3::zeros()), Err(Error::BehindCamera)));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let c = Camera::look_at("c", [900.0, 950.0, 480.0, 520.0], (1000, 1000), Vec3::new(3.0, -2.0, 1.5), Vec3::new(0.0, 0.0, 1.0), Vec3::z()).unwrap();
        let p = Vec3::new(0.2, 0.1, 1.1);
        let (_, j) = c.project_with_jacobian(&p).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let mut a = p;
            let mut b = p;
            a[k] += h;
            b[k] -= h;
            let fd = (c.project(&a).unwrap() - c.project(&b).unwrap()) / (2.0 * h);
            assert!((fd - j.column(k)).norm() < 1e-5);
        }
    }

    #[test]
    fn look_at_centers_target() {
        let c = Camera::look_at("c", [1000.0, 1000.0, 500.0, 400.0], (1000, 800), Vec3::new(4.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 1.0), Vec3::z()).unwrap();
        let uv = c.project(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((uv - Pixel::new(500.0, 400.0)).norm() < 1e-9);
        // world up appears as image up (smaller v)
        assert!(c.project(&Vec3::new(0.0, 0.0, 1.5)).unwrap().y < 400.0);
        assert!((c.center() - Vec3::new(4.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn invalid_intrinsics_rejected() {
        assert!(Camera::new("c", [0.0, 1.0, 1.0, 1.0], RigidTransform::identity(), (2, 2)).is_err());
        assert!(Camera::new("c", [1.0, 1.0, 5.0, 1.0], RigidTransform::identity(), (2, 2)).is_err());
    }

    #[test]
    fn serde_uses_documented_keys() {
        let c = origin_cam();
        let s = serde_json::to_value(&c).unwrap();
        for key in ["fx", "fy", "cx", "cy", "R", "t", "width", "height", "name"] {
            assert!(s.get(key).is_some(), "{key}");
        }
        let back: Camera = serde_json::from_value(s).unwrap();
        assert_eq!(back, c);
    }
}
