//! Seeded synthetic capture rigs: cameras around the subject, random poses
//! and noisy keypoint projections.

use nalgebra::UnitQuaternion;
use rand::Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use crate::body::humanoid::{
    LEFT_ELBOW, LEFT_HIP, LEFT_KNEE, LEFT_SHOULDER, RIGHT_ELBOW, RIGHT_HIP, RIGHT_KNEE, RIGHT_SHOULDER,
};
use crate::body::{BodyModel, BodyParams, Region};
use crate::camera::{Camera, Detection, KeypointSet};
use crate::contact::ContactVector;
use crate::predictor::{VertexFeatures, POSITION_SCALE};
use crate::error::{Error, Result};
use crate::geometry::{Mesh, Vec3};

/// `count` cameras evenly spaced on a horizontal circle, all looking at
/// `target`. Intrinsics are `f = 1000`, 1000×1000 images.
pub fn ring_cameras(count: usize, radius: f64, height: f64, target: Vec3) -> Result<Vec<Camera>> {
    (0..count)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / count as f64 + 0.3;
            let eye = Vec3::new(target.x + radius * a.cos(), target.y + radius * a.sin(), height);
            Camera::look_at(format!("cam{i}"), [1000.0, 1000.0, 500.0, 500.0], (1000, 1000), eye, target, Vec3::z())
        })
        .collect()
}

/// Four views spread out of plane: three low around the subject and one high
/// overhead. Unlike a flat ring, no clean view shares most of its pairs with
/// a single corrupted one.
pub fn tetra_cameras(target: Vec3) -> Result<Vec<Camera>> {
    let place = |i: usize, azimuth: f64, radius: f64, height: f64| {
        let a = azimuth.to_radians();
        let eye = Vec3::new(target.x + radius * a.cos(), target.y + radius * a.sin(), height);
        Camera::look_at(format!("cam{i}"), [1000.0, 1000.0, 500.0, 500.0], (1000, 1000), eye, target, Vec3::z())
    };
    Ok(vec![place(0, 0.0, 4.0, 0.3)?, place(1, 120.0, 4.0, 0.3)?, place(2, 240.0, 4.0, 0.3)?, place(3, 60.0, 1.5, 5.0)?])
}

/// Joints whose rotation moves no other joint.
pub fn leaf_joints(model: &BodyModel) -> Vec<usize> {
    (0..model.joint_count())
        .filter(|&j| !model.parents().contains(&Some(j)))
        .collect()
}

fn random_rotation<R: Rng + ?Sized>(rng: &mut R, max_angle: f64) -> Vec3 {
    let axis: [f64; 3] = UnitSphere.sample(rng);
    Vec3::from(axis) * rng.random_range(0.0..=max_angle)
}

/// Random pose with every non-leaf joint rotated by at most `max_angle`
/// radians, global orientation about the vertical axis only, and the pelvis
/// placed at `translation`. Leaf joints and hand coefficients stay at zero.
/// Elbows and knees always bend in their natural direction, by at least
/// 0.05 rad.
pub fn random_pose<R: Rng + ?Sized>(model: &BodyModel, rng: &mut R, max_angle: f64, translation: Vec3) -> BodyParams {
    let leaves = leaf_joints(model);
    let mut p = model.zero_params();
    p.translation = translation;
    p.pose[0] = Vec3::z() * rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    for j in 1..model.joint_count() {
        if !leaves.contains(&j) {
            p.pose[j] = random_rotation(rng, max_angle);
        }
    }
    for bend in model.bend_joints() {
        let axis = Vec3::from(bend.axis);
        let flexion = p.pose[bend.joint].dot(&axis);
        p.pose[bend.joint] += axis * (flexion.abs() - flexion + 0.05);
    }
    p
}

/// Composes every joint rotation with a random rotation of at most
/// `max_angle` radians and shifts the translation by up to `max_shift` per
/// axis.
pub fn perturb<R: Rng + ?Sized>(params: &BodyParams, rng: &mut R, max_angle: f64, max_shift: f64) -> BodyParams {
    let mut out = params.clone();
    for p in out.pose.iter_mut() {
        let q = UnitQuaternion::from_scaled_axis(random_rotation(rng, max_angle)) * UnitQuaternion::from_scaled_axis(*p);
        *p = q.scaled_axis();
    }
    if max_shift > 0.0 {
        for c in out.translation.iter_mut() {
            *c += rng.random_range(-max_shift..=max_shift);
        }
    }
    out
}

/// Projects the posed joints into every camera, adding isotropic Gaussian
/// pixel noise with standard deviation `noise_px`. Confidence is 1.
pub fn project_keypoints<R: Rng + ?Sized>(
    model: &BodyModel,
    params: &BodyParams,
    cams: &[Camera],
    noise_px: f64,
    rng: &mut R,
) -> Result<KeypointSet> {
    let joints = model.pose_body(params)?.joints;
    let noise = Normal::new(0.0, noise_px.max(0.0)).map_err(|e| Error::invalid("noise", e.to_string()))?;
    let views = cams
        .iter()
        .map(|cam| {
            joints
                .iter()
                .map(|p| {
                    let uv = cam.project(p)?;
                    let (du, dv) = if noise_px > 0.0 { (noise.sample(rng), noise.sample(rng)) } else { (0.0, 0.0) };
                    Ok(Detection::new(uv.x + du, uv.y + dv, 1.0))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    KeypointSet::new(views)
}

/// Arms lowered from the T-pose with slightly bent elbows.
fn relaxed_arms(p: &mut BodyParams) {
    p.pose[LEFT_SHOULDER] = Vec3::new(0.0, 1.25, 0.0);
    p.pose[RIGHT_SHOULDER] = Vec3::new(0.0, -1.25, 0.0);
    p.pose[LEFT_ELBOW] = Vec3::new(0.0, 0.0, 0.2);
    p.pose[RIGHT_ELBOW] = Vec3::new(0.0, 0.0, -0.2);
}

/// Moves the body vertically so that its lowest vertex sits at `floor`.
pub fn place_on_floor(model: &BodyModel, params: &BodyParams, floor: f64) -> Result<BodyParams> {
    let lowest = model
        .pose_body(params)?
        .vertices
        .iter()
        .map(|v| v.z)
        .fold(f64::INFINITY, f64::min);
    let mut out = params.clone();
    out.translation.z += floor - lowest;
    Ok(out)
}

/// Walking gait at `phase` radians: hips swing in opposition about the
/// lateral axis, the swing knee flexes, arms hang. Only flexion angles are
/// used, no twist.
pub fn walking_pose(model: &BodyModel, phase: f64) -> BodyParams {
    let mut p = model.zero_params();
    relaxed_arms(&mut p);
    let swing = 0.35 * phase.sin();
    p.pose[LEFT_HIP] = Vec3::x() * swing;
    p.pose[RIGHT_HIP] = -Vec3::x() * swing;
    p.pose[LEFT_KNEE] = -Vec3::x() * (0.1 + 0.5 * phase.sin().max(0.0));
    p.pose[RIGHT_KNEE] = -Vec3::x() * (0.1 + 0.5 * (-phase.sin()).max(0.0));
    p
}

/// Seated pose: thighs horizontal and pointing forward, shins vertical.
pub fn sitting_pose(model: &BodyModel) -> BodyParams {
    let mut p = model.zero_params();
    relaxed_arms(&mut p);
    let half = std::f64::consts::FRAC_PI_2;
    p.pose[LEFT_HIP] = Vec3::x() * half;
    p.pose[RIGHT_HIP] = Vec3::x() * half;
    p.pose[LEFT_KNEE] = -Vec3::x() * half;
    p.pose[RIGHT_KNEE] = -Vec3::x() * half;
    p
}

/// Axis-aligned box with outward-facing triangles.
pub fn box_mesh(min: Vec3, max: Vec3) -> Mesh {
    let c = |i: usize| Vec3::new(
        if i & 1 == 0 { min.x } else { max.x },
        if i & 2 == 0 { min.y } else { max.y },
        if i & 4 == 0 { min.z } else { max.z },
    );
    let vertices = (0..8).map(c).collect();
    let faces = vec![
        [0, 2, 1], [1, 2, 3], // bottom (-z)
        [4, 5, 6], [5, 7, 6], // top (+z)
        [0, 1, 4], [1, 5, 4], // -y
        [2, 6, 3], [3, 6, 7], // +y
        [0, 4, 2], [2, 4, 6], // -x
        [1, 3, 5], [3, 7, 5], // +x
    ];
    Mesh::new(vertices, faces).expect("box indices are in range")
}

/// Concatenates meshes into one.
pub fn merge_meshes(parts: &[Mesh]) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for m in parts {
        let base = vertices.len();
        vertices.extend_from_slice(m.vertices());
        faces.extend(m.faces().iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
    }
    Mesh::new(vertices, faces)
}

/// A box whose top touches the lowest pelvis and thigh vertices of the
/// seated body (behind its knees), standing on the floor `z = floor`.
pub fn seat_under(model: &BodyModel, params: &BodyParams, floor: f64) -> Result<Mesh> {
    let posed = model.pose_body(params)?;
    let knee_y = posed.joints[LEFT_KNEE].y.min(posed.joints[RIGHT_KNEE].y);
    let pelvis = posed.joints[0];
    let mut top = f64::INFINITY;
    for (v, r) in posed.vertices.iter().zip(model.regions()) {
        if matches!(r, Region::Pelvis | Region::Thigh) && v.y < knee_y - 0.08 {
            top = top.min(v.z);
        }
    }
    if !top.is_finite() || top <= floor {
        return Err(Error::invalid("seat", "body is not seated above the floor"));
    }
    Ok(box_mesh(
        Vec3::new(pelvis.x - 0.3, pelvis.y - 0.25, floor),
        Vec3::new(pelvis.x + 0.3, knee_y - 0.08, top),
    ))
}

/// Height of the undulating terrain of [`terrain_scene`] at `(x, y)`.
pub fn terrain_height(x: f64, y: f64) -> f64 {
    0.06 * (1.7 * x).sin() * (1.3 * y).cos()
}

/// 4 m × 4 m undulating ground centred at the origin, 2048 triangles, with
/// upward-facing orientation.
pub fn terrain_scene() -> Mesh {
    crate::geometry::grid_mesh(33, 33, 0.125)
        .map_vertices(|v| {
            let (x, y) = (v.x - 2.0, v.y - 2.0);
            Vec3::new(x, y, terrain_height(x, y))
        })
        .expect("terrain is finite")
}

/// Random pose and heading with the pelvis somewhere over `[-1, 1]²` and
/// the lowest vertex within ±3 cm of the terrain below the pelvis.
pub fn random_placement<R: Rng + ?Sized>(model: &BodyModel, rng: &mut R) -> Result<BodyParams> {
    let (x, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let p = random_pose(model, rng, 0.6, Vec3::new(x, y, 0.0));
    let floor = terrain_height(x, y) + rng.random_range(-0.03..0.03);
    place_on_floor(model, &p, floor)
}

/// Height below which a vertex counts as touching in [`height_contact_dataset`].
pub const HEIGHT_CONTACT: f64 = 0.03;

/// Random poses resting on a floor at `z = 0` (lowest vertex within ±2 cm),
/// labelled contact exactly where a vertex lies below [`HEIGHT_CONTACT`].
pub fn height_contact_dataset<R: Rng + ?Sized>(
    model: &BodyModel,
    frames: usize,
    rng: &mut R,
) -> Result<Vec<(VertexFeatures, ContactVector)>> {
    (0..frames)
        .map(|_| {
            let p = random_pose(model, rng, 0.6, Vec3::zeros());
            let p = place_on_floor(model, &p, rng.random_range(-0.02..0.02))?;
            let x = VertexFeatures::from_body(model, &p)?;
            let labels = (0..x.vertex_count()).map(|v| x.values[(v, 2)] < HEIGHT_CONTACT * POSITION_SCALE).collect();
            Ok((x, ContactVector::new(model.topology_name(), labels)))
        })
        .collect()
}
