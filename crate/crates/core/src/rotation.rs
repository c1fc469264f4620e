//! Axis-angle helpers: exponential map, its derivative and the log map.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

const SMALL_ANGLE: f64 = 1e-10;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula.
pub fn exp(aa: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*aa).into_inner()
}

pub fn log(r: &Matrix3<f64>) -> Vector3<f64> {
    let rot = Rotation3::from_matrix_unchecked(*r);
    rot.scaled_axis()
}

/// Partial derivatives `dR/dθ_i` of `R = exp(θ)`.
///
/// Uses the closed form
/// `dR/dθ_i = (θ_i [θ]× + [θ × (I - R) e_i]×) R / |θ|²`,
/// which reduces to `[e_i]×` at the identity.
pub fn exp_derivatives(aa: &Vector3<f64>) -> (Matrix3<f64>, [Matrix3<f64>; 3]) {
    let r = exp(aa);
    let n2 = aa.norm_squared();
    let mut d = [Matrix3::zeros(); 3];
    if n2 < SMALL_ANGLE * SMALL_ANGLE {
        for (i, di) in d.iter_mut().enumerate() {
            *di = skew(&Vector3::ith(i, 1.0));
        }
        return (r, d);
    }
    let k = skew(aa);
    let i_minus_r = Matrix3::identity() - r;
    for (i, di) in d.iter_mut().enumerate() {
        let e = Vector3::ith(i, 1.0);
        let w = aa.cross(&(i_minus_r * e));
        *di = (k * aa[i] + skew(&w)) * r / n2;
    }
    (r, d)
}

pub fn to_quaternion(aa: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*aa)
}

/// Geodesic angle between two rotations, in radians.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    to_quaternion(a).angle_to(&to_quaternion(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_matches_finite_differences() {
        let samples = [
            Vector3::new(0.3, -0.2, 0.9),
            Vector3::new(1e-12, 0.0, 0.0),
            Vector3::new(2.5, 0.4, -1.1),
        ];
        let h = 1e-6;
        for aa in samples {
            let (_, d) = exp_derivatives(&aa);
            for (i, di) in d.iter().enumerate() {
                let mut p = aa;
                let mut m = aa;
                p[i] += h;
                m[i] -= h;
                let fd = (exp(&p) - exp(&m)) / (2.0 * h);
                assert!((fd - di).norm() < 1e-6, "axis {i}: {}", (fd - di).norm());
            }
        }
    }

    #[test]
    fn log_inverts_exp() {
        let aa = Vector3::new(0.1, 0.7, -0.4);
        assert!((log(&exp(&aa)) - aa).norm() < 1e-12);
    }
}
