//! Procedural capsule-limbed humanoid with the 24-joint SMPL layout.
//!
//! Z is up, +y is forward and the subject's left is +x. The model is built
//! from tubes along five joint chains (torso, two legs, two arms). Limb
//! tubes are welded to the torso through their start-cap pole so the edge
//! graph is connected. Every joint is the centroid of a vertex ring, which
//! makes the regressor exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{BendJoint, BodyModel, HandJoint, Region};
use crate::geometry::Vec3;
use crate::rotation;

pub const JOINT_NAMES: [&str; 24] = [
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
    "spine2", "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
    "neck", "left_collar", "right_collar", "head", "left_shoulder", "right_shoulder",
    "left_elbow", "right_elbow", "left_wrist", "right_wrist", "left_hand", "right_hand",
];

pub const PARENTS: [i64; 24] = [
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
];

pub const PELVIS: usize = 0;
pub const LEFT_HIP: usize = 1;
pub const RIGHT_HIP: usize = 2;
pub const LEFT_KNEE: usize = 4;
pub const RIGHT_KNEE: usize = 5;
pub const LEFT_SHOULDER: usize = 16;
pub const RIGHT_SHOULDER: usize = 17;
pub const LEFT_ELBOW: usize = 18;
pub const RIGHT_ELBOW: usize = 19;
pub const LEFT_HAND: usize = 22;
pub const RIGHT_HAND: usize = 23;

pub const TOPOLOGY_NAME: &str = "test-humanoid";
pub const HAND_PCA_DIM: usize = 3;
const RING: usize = 10;
const SOLE_HEIGHT: f64 = 0.015;

#[derive(Clone, Copy)]
struct ChainPoint {
    joint: Option<usize>,
    pos: [f64; 3],
    radius: f64,
}

const fn jp(joint: usize, pos: [f64; 3], radius: f64) -> ChainPoint {
    ChainPoint { joint: Some(joint), pos, radius }
}

const fn tip(pos: [f64; 3], radius: f64) -> ChainPoint {
    ChainPoint { joint: None, pos, radius }
}

struct Chain {
    points: Vec<ChainPoint>,
    /// Joint blended into the first ring; the chain is welded to the torso.
    attach: Option<usize>,
    reference: Vec3,
}

fn chains() -> Vec<Chain> {
    let leg = |s: f64, hip: usize, knee: usize, ankle: usize, foot: usize| Chain {
        points: vec![
            jp(hip, [s * 0.09, 0.0, 0.88], 0.075),
            jp(knee, [s * 0.10, 0.0, 0.50], 0.05),
            jp(ankle, [s * 0.10, -0.01, 0.09], 0.04),
            jp(foot, [s * 0.10, 0.12, 0.035], 0.035),
            tip([s * 0.10, 0.20, 0.03], 0.03),
        ],
        attach: Some(PELVIS),
        reference: Vec3::y(),
    };
    let arm = |s: f64, collar: usize, shoulder: usize, elbow: usize, wrist: usize, hand: usize| Chain {
        points: vec![
            jp(collar, [s * 0.07, 0.0, 1.40], 0.05),
            jp(shoulder, [s * 0.18, 0.0, 1.41], 0.05),
            jp(elbow, [s * 0.44, 0.0, 1.41], 0.04),
            jp(wrist, [s * 0.69, 0.0, 1.41], 0.03),
            jp(hand, [s * 0.77, 0.0, 1.41], 0.035),
            tip([s * 0.87, 0.0, 1.41], 0.025),
        ],
        attach: Some(9),
        reference: Vec3::y(),
    };
    vec![
        Chain {
            points: vec![
                jp(0, [0.0, 0.0, 0.93], 0.14),
                jp(3, [0.0, 0.0, 1.04], 0.13),
                jp(6, [0.0, 0.0, 1.17], 0.14),
                jp(9, [0.0, 0.0, 1.30], 0.15),
                jp(12, [0.0, 0.0, 1.47], 0.06),
                jp(15, [0.0, 0.01, 1.57], 0.095),
                tip([0.0, 0.01, 1.70], 0.06),
            ],
            attach: None,
            reference: Vec3::y(),
        },
        leg(1.0, 1, 4, 7, 10),
        leg(-1.0, 2, 5, 8, 11),
        arm(1.0, 13, 16, 18, 20, 22),
        arm(-1.0, 14, 17, 19, 21, 23),
    ]
}

fn region_for(joint_at_or_before: usize) -> Region {
    match joint_at_or_before {
        0 => Region::Pelvis,
        3 | 6 | 9 | 12 | 13 | 14 => Region::Torso,
        15 => Region::Head,
        1 | 2 => Region::Thigh,
        4 | 5 => Region::Shin,
        7 | 8 | 10 | 11 => Region::Foot,
        16 | 17 => Region::UpperArm,
        18 | 19 => Region::Forearm,
        _ => Region::Hand,
    }
}

struct Ring {
    center: Vec3,
    dir: Vec3,
    radius: f64,
    weights: Vec<(usize, f64)>,
    region: Region,
    joint: Option<usize>,
}

/// Builds the humanoid. Same seed, bitwise-identical model.
///
/// The seed jitters ring radii by up to ±2% and rotates the hand pose basis.
pub fn make_test_humanoid(seed: u64) -> BodyModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut template: Vec<Vec3> = Vec::new();
    let mut ring_center: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut skin: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut regions: Vec<Region> = Vec::new();
    let mut regressor: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 24];
    let mut foot_chain_vertices: Vec<usize> = Vec::new();
    let mut torso_vertex_range = 0..0;

    for (chain_index, chain) in chains().iter().enumerate() {
        let pts = &chain.points;
        let pos = |i: usize| Vec3::from(pts[i].pos);
        // ring list: chain points plus evenly spaced intermediates
        let mut rings: Vec<Ring> = Vec::new();
        for i in 0..pts.len() {
            let dir = if i == 0 {
                (pos(1) - pos(0)).normalize()
            } else if i + 1 == pts.len() {
                (pos(i) - pos(i - 1)).normalize()
            } else {
                ((pos(i) - pos(i - 1)).normalize() + (pos(i + 1) - pos(i)).normalize()).normalize()
            };
            let driver_before = if i == 0 { chain.attach } else { pts[i - 1].joint };
            let weights = match (pts[i].joint, driver_before) {
                (Some(j), Some(b)) => vec![(b, 0.5), (j, 0.5)],
                (Some(j), None) => vec![(j, 1.0)],
                (None, Some(b)) => vec![(b, 1.0)],
                (None, None) => unreachable!("chain tip without a driver"),
            };
            let region_joint = pts[i].joint.or(driver_before).unwrap();
            let jitter = 1.0 + rng.random_range(-0.02..0.02);
            rings.push(Ring {
                center: pos(i),
                dir,
                radius: pts[i].radius * jitter,
                weights,
                region: region_for(region_joint),
                joint: pts[i].joint,
            });
            if i + 1 < pts.len() {
                let seg = pos(i + 1) - pos(i);
                let n_mid = (seg.norm() / 0.1).floor() as usize;
                let driver = pts[i].joint.expect("segments start at a joint");
                for m in 1..=n_mid {
                    let f = m as f64 / (n_mid + 1) as f64;
                    let jitter = 1.0 + rng.random_range(-0.02..0.02);
                    rings.push(Ring {
                        center: pos(i) + seg * f,
                        dir: seg.normalize(),
                        radius: (pts[i].radius * (1.0 - f) + pts[i + 1].radius * f) * jitter,
                        weights: vec![(driver, 1.0)],
                        region: region_for(driver),
                        joint: None,
                    });
                }
            }
        }

        // parallel-transported ring frames
        let mut u = chain.reference;
        let mut prev_dir = rings[0].dir;
        u = (u - prev_dir * u.dot(&prev_dir)).normalize();
        let chain_start = template.len();
        let mut ring_starts = Vec::with_capacity(rings.len());
        for ring in &rings {
            let axis = prev_dir.cross(&ring.dir);
            let angle = axis.norm().atan2(prev_dir.dot(&ring.dir));
            if axis.norm() > 1e-12 {
                u = rotation::exp(&(axis.normalize() * angle)) * u;
            }
            u = (u - ring.dir * u.dot(&ring.dir)).normalize();
            prev_dir = ring.dir;
            let w = ring.dir.cross(&u);
            ring_starts.push(template.len());
            for k in 0..RING {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / RING as f64;
                let v = ring.center + (u * phi.cos() + w * phi.sin()) * ring.radius;
                let idx = template.len();
                template.push(v);
                ring_center.push(ring.center);
                skin.push(ring.weights.clone());
                regions.push(ring.region);
                if let Some(j) = ring.joint {
                    regressor[j].push((idx, 1.0 / RING as f64));
                }
            }
        }
        for r in 0..rings.len() - 1 {
            let (a, b) = (ring_starts[r], ring_starts[r + 1]);
            for k in 0..RING {
                let k1 = (k + 1) % RING;
                faces.push([a + k, a + k1, b + k]);
                faces.push([a + k1, b + k1, b + k]);
            }
        }
        // end cap
        let last = rings.last().unwrap();
        let pole = template.len();
        template.push(last.center + last.dir * last.radius * 0.6);
        ring_center.push(last.center);
        skin.push(last.weights.clone());
        regions.push(last.region);
        let b = *ring_starts.last().unwrap();
        for k in 0..RING {
            faces.push([b + k, b + (k + 1) % RING, pole]);
        }
        // start cap: own pole for the torso, welded to the torso for limbs
        let a = ring_starts[0];
        let first = &rings[0];
        let start_pole = if chain.attach.is_none() {
            let p = template.len();
            template.push(first.center - first.dir * first.radius * 0.6);
            ring_center.push(first.center);
            skin.push(first.weights.clone());
            regions.push(first.region);
            p
        } else {
            let target = first.center - first.dir * first.radius * 0.6;
            torso_vertex_range
                .clone()
                .min_by(|&x: &usize, &y: &usize| {
                    (template[x] - target)
                        .norm_squared()
                        .total_cmp(&(template[y] - target).norm_squared())
                })
                .expect("torso is built first")
        };
        for k in 0..RING {
            faces.push([a + (k + 1) % RING, a + k, start_pole]);
        }
        if chain_index == 0 {
            torso_vertex_range = chain_start..template.len();
        }
        if (1..=2).contains(&chain_index) {
            // rings from the ankle onward
            let ankle_ring = rings
                .iter()
                .position(|r| matches!(r.joint, Some(7) | Some(8)))
                .unwrap();
            foot_chain_vertices.extend(ring_starts[ankle_ring]..template.len());
        }
    }

    for &v in &foot_chain_vertices {
        if template[v].z < SOLE_HEIGHT {
            regions[v] = Region::FootSole;
        }
    }

    let shape_dirs = vec![
        template.iter().map(|v| Vec3::new(0.0, 0.0, 0.06 * v.z)).collect(),
        template
            .iter()
            .zip(&ring_center)
            .map(|(v, c)| (v - c) * 0.15)
            .collect(),
    ];

    let hands = [LEFT_HAND, RIGHT_HAND]
        .into_iter()
        .map(|joint| {
            let aa = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let r = rotation::exp(&aa);
            HandJoint {
                joint,
                basis: (0..HAND_PCA_DIM)
                    .map(|c| {
                        let col = r.column(c);
                        [col[0], col[1], col[2]]
                    })
                    .collect(),
            }
        })
        .collect();

    let model = BodyModel {
        topology_name: TOPOLOGY_NAME.to_string(),
        template,
        faces,
        joint_names: JOINT_NAMES.iter().map(|s| s.to_string()).collect(),
        parents: PARENTS
            .iter()
            .map(|&p| if p < 0 { None } else { Some(p as usize) })
            .collect(),
        regressor,
        skin_weights: skin,
        shape_dirs,
        regions,
        hands,
        bend_joints: vec![
            BendJoint { joint: LEFT_KNEE, axis: [-1.0, 0.0, 0.0] },
            BendJoint { joint: RIGHT_KNEE, axis: [-1.0, 0.0, 0.0] },
            BendJoint { joint: LEFT_ELBOW, axis: [0.0, 0.0, 1.0] },
            BendJoint { joint: RIGHT_ELBOW, axis: [0.0, 0.0, -1.0] },
        ],
    };
    debug_assert!(model.validate().is_ok());
    model
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_is_valid() {
        let m = make_test_humanoid(0);
        m.validate().unwrap();
        assert_eq!(m.joint_count(), 24);
        assert_eq!(m.shape_count(), 2);
        assert!(m.has_foot_sole());
        assert!((500..=700).contains(&m.vertex_count()), "{}", m.vertex_count());
        let mesh = m.template_mesh().unwrap();
        assert!(mesh.is_consistently_oriented());
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        assert_eq!(make_test_humanoid(5), make_test_humanoid(5));
        assert_ne!(make_test_humanoid(5), make_test_humanoid(6));
    }

    #[test]
    fn standing_height_is_human() {
        // regression value measured on the generated asset
        let m = make_test_humanoid(0);
        let (lo, hi) = m.template_mesh().unwrap().bounding_box().unwrap();
        let h = hi.z - lo.z;
        assert!((h - 1.7).abs() <= 0.1, "height {h}");
        assert!(lo.z.abs() < 0.01);
    }

    #[test]
    fn regressed_joints_sit_on_chain_points() {
        let m = make_test_humanoid(0);
        let s = m.shaped(&[0.0, 0.0]).unwrap();
        assert!((s.joints[PELVIS] - Vec3::new(0.0, 0.0, 0.93)).norm() < 1e-12);
        assert!((s.joints[LEFT_ELBOW] - Vec3::new(0.44, 0.0, 1.41)).norm() < 1e-12);
    }

    #[test]
    fn outward_normals_on_tubes() {
        let m = make_test_humanoid(0);
        let mesh = m.template_mesh().unwrap();
        // mid-thigh vertices: normal points away from the leg axis
        let s = m.shaped(&[0.0, 0.0]).unwrap();
        let mut checked = 0;
        for (v, n) in mesh.vertices().iter().zip(mesh.vertex_normals()) {
            if (v.z - 0.7).abs() < 0.06 && v.x > 0.0 && v.x < 0.2 && m.regions()[mesh.vertices().iter().position(|x| x == v).unwrap()] == Region::Thigh {
                let axis = s.joints[LEFT_HIP] + (s.joints[LEFT_KNEE] - s.joints[LEFT_HIP]) * ((0.88 - v.z) / 0.38);
                assert!(n.dot(&(v - axis)) > 0.0);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}
