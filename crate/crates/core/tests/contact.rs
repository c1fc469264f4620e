use std::sync::Arc;

use hsc_core::body::{make_test_humanoid, BodyModel, BodyParams, Region};
use hsc_core::contact::{annotate_contact, contact_from_fit, ContactConfig};
use hsc_core::fitting::FitResult;
use hsc_core::geometry::bvh::closest_point_on_triangle;
use hsc_core::geometry::{Bvh, Mesh, RigidTransform, Vec3};
use hsc_core::rotation;
use hsc_core::synthetic::{merge_meshes, place_on_floor, random_placement, seat_under, sitting_pose, terrain_scene};
use hsc_core::Execution;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Posed body in scene coordinates: vertices and normals.
fn posed(model: &BodyModel, p: &BodyParams) -> Mesh {
    Mesh::new(model.pose_body(p).unwrap().vertices, model.faces().to_vec()).unwrap()
}

/// Exhaustive scan over every scene triangle; ties go to the lower face
/// index, matching the documented tie-break.
fn brute_force_labels(body: &Mesh, regions: &[Region], scene: &Mesh, cfg: &ContactConfig) -> Vec<bool> {
    body.vertices()
        .iter()
        .zip(body.vertex_normals())
        .zip(regions)
        .map(|((v, n), &r)| {
            let mut best = (f64::INFINITY, 0);
            for f in 0..scene.face_count() {
                let [a, b, c] = scene.triangle(f);
                let d2 = (closest_point_on_triangle(v, &a, &b, &c) - v).norm_squared();
                if d2 < best.0 {
                    best = (d2, f);
                }
            }
            let scene_normal = scene.face_normal(best.1);
            best.0.sqrt() < cfg.threshold(r)
                && (cfg.normal_max_angle >= 180.0 || n.dot(&-scene_normal) >= cfg.normal_max_angle.to_radians().cos())
        })
        .collect()
}

fn fit_of(frames: Vec<BodyParams>) -> FitResult {
    let n = frames.len();
    FitResult {
        frames,
        energies: vec![Default::default(); n],
        weights: vec![],
        converged: vec![true; n],
        iterations: vec![0; n],
        history: vec![],
    }
}

#[test]
fn matches_brute_force_over_random_placements() {
    let model = make_test_humanoid(3);
    let scene = terrain_scene();
    assert!(scene.face_count() >= 2000);
    let bvh = Bvh::new(Arc::new(scene.clone())).unwrap();
    let cfg = ContactConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut positives = 0;
    for _ in 0..100 {
        let p = random_placement(&model, &mut rng).unwrap();
        let body = posed(&model, &p);
        let got = annotate_contact(model.topology_name(), body.vertices(), body.vertex_normals(), model.regions(), &bvh, &cfg, Execution::Parallel).unwrap();
        let want = brute_force_labels(&body, model.regions(), &scene, &cfg);
        assert_eq!(got.labels, want);
        positives += got.count();
    }
    assert!(positives > 100, "placements should produce contacts, got {positives}");
}

#[test]
fn sequential_and_parallel_agree() {
    let model = make_test_humanoid(3);
    let bvh = Bvh::new(Arc::new(terrain_scene())).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let body = posed(&model, &random_placement(&model, &mut rng).unwrap());
    let run = |e| annotate_contact("t", body.vertices(), body.vertex_normals(), model.regions(), &bvh, &ContactConfig::default(), e).unwrap();
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}

#[test]
fn floating_body_has_no_contact() {
    let model = make_test_humanoid(3);
    let bvh = Bvh::new(Arc::new(terrain_scene())).unwrap();
    let mut p = place_on_floor(&model, &model.zero_params(), 0.0).unwrap();
    p.translation.z += 1.0;
    let labels = contact_from_fit(&fit_of(vec![p]), &model, &bvh, &RigidTransform::identity(), &ContactConfig::default(), Execution::Sequential).unwrap();
    assert_eq!(labels[0].count(), 0);
}

#[test]
fn standing_body_touches_with_its_soles() {
    let model = make_test_humanoid(3);
    let floor = hsc_core::geometry::grid_mesh(21, 21, 0.2).map_vertices(|v| v - Vec3::new(2.0, 2.0, 0.0)).unwrap();
    let bvh = Bvh::new(Arc::new(floor)).unwrap();
    let p = place_on_floor(&model, &model.zero_params(), 0.0).unwrap();
    let c = &contact_from_fit(&fit_of(vec![p]), &model, &bvh, &RigidTransform::identity(), &ContactConfig::default(), Execution::Sequential).unwrap()[0];
    assert!(c.count() > 0);
    for (l, r) in c.labels.iter().zip(model.regions()) {
        if *l {
            assert!(matches!(r, Region::FootSole | Region::Foot), "{r:?}");
        }
    }
}

#[test]
fn seated_body_touches_seat_with_thighs_not_head() {
    let model = make_test_humanoid(3);
    let p = place_on_floor(&model, &sitting_pose(&model), 0.0).unwrap();
    let floor = hsc_core::geometry::grid_mesh(21, 21, 0.2).map_vertices(|v| v - Vec3::new(2.0, 2.0, 0.0)).unwrap();
    let scene = merge_meshes(&[floor, seat_under(&model, &p, 0.0).unwrap()]).unwrap();
    let bvh = Bvh::new(Arc::new(scene.clone())).unwrap();
    let cfg = ContactConfig::default();
    let c = &contact_from_fit(&fit_of(vec![p.clone()]), &model, &bvh, &RigidTransform::identity(), &cfg, Execution::Sequential).unwrap()[0];
    let count = |region: Region| c.labels.iter().zip(model.regions()).filter(|(l, r)| **l && **r == region).count();
    assert!(count(Region::Thigh) + count(Region::Pelvis) > 5);
    assert!(count(Region::FootSole) > 0);
    assert_eq!(count(Region::Head), 0);
    assert_eq!(c.labels, brute_force_labels(&posed(&model, &p), model.regions(), &scene, &cfg));
}

#[test]
fn alignment_is_applied_like_pre_transformed_vertices() {
    let model = make_test_humanoid(3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = random_placement(&model, &mut rng).unwrap();
    let align = RigidTransform::new(rotation::exp(&Vec3::new(0.0, 0.0, 0.3)), Vec3::new(0.2, -0.1, 0.0)).unwrap();
    let bvh = Bvh::new(Arc::new(terrain_scene())).unwrap();
    let cfg = ContactConfig::default();
    let via_align = &contact_from_fit(&fit_of(vec![p.clone()]), &model, &bvh, &align, &cfg, Execution::Sequential).unwrap()[0];
    let moved = Mesh::new(model.pose_body(&p).unwrap().vertices.iter().map(|v| align.apply(v)).collect(), model.faces().to_vec()).unwrap();
    let direct = annotate_contact(model.topology_name(), moved.vertices(), moved.vertex_normals(), model.regions(), &bvh, &cfg, Execution::Sequential).unwrap();
    assert_eq!(via_align, &direct);
}

#[test]
fn region_table_mismatch_is_an_error() {
    let model = make_test_humanoid(3);
    let bvh = Bvh::new(Arc::new(terrain_scene())).unwrap();
    let body = posed(&model, &model.zero_params());
    let r = annotate_contact("t", body.vertices(), body.vertex_normals(), &model.regions()[1..], &bvh, &ContactConfig::default(), Execution::Sequential);
    assert!(r.is_err());
}

fn arb_scene_case() -> impl Strategy<Value = (u64, f64, f64, f64)> {
    (0u64..1000, 0.01f64..0.08, 0.01f64..0.08, 10.0f64..179.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn larger_thresholds_never_remove_contacts((seed, foot, body, angle) in arb_scene_case(), grow in 1.0f64..2.0) {
        let model = make_test_humanoid(3);
        let bvh = Bvh::new(Arc::new(terrain_scene())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = posed(&model, &random_placement(&model, &mut rng).unwrap());
        let small = ContactConfig { threshold_foot: foot, threshold_body: body, normal_max_angle: angle };
        let large = ContactConfig { threshold_foot: foot * grow, threshold_body: body * grow, ..small };
        let a = annotate_contact("t", mesh.vertices(), mesh.vertex_normals(), model.regions(), &bvh, &small, Execution::Sequential).unwrap();
        let b = annotate_contact("t", mesh.vertices(), mesh.vertex_normals(), model.regions(), &bvh, &large, Execution::Sequential).unwrap();
        for (x, y) in a.labels.iter().zip(&b.labels) {
            prop_assert!(!*x || *y);
        }
    }

    #[test]
    fn straight_angle_reduces_to_distance_only((seed, foot, body, _a) in arb_scene_case()) {
        let model = make_test_humanoid(3);
        let scene = terrain_scene();
        let bvh = Bvh::new(Arc::new(scene)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = posed(&model, &random_placement(&model, &mut rng).unwrap());
        let cfg = ContactConfig { threshold_foot: foot, threshold_body: body, normal_max_angle: 180.0 };
        let got = annotate_contact("t", mesh.vertices(), mesh.vertex_normals(), model.regions(), &bvh, &cfg, Execution::Sequential).unwrap();
        for ((v, r), l) in mesh.vertices().iter().zip(model.regions()).zip(&got.labels) {
            prop_assert_eq!(*l, bvh.closest_point(v).distance < cfg.threshold(*r));
        }
    }

    #[test]
    fn common_rigid_motion_keeps_labels(seed in 0u64..1000, aa in prop::array::uniform3(-3.0f64..3.0), t in prop::array::uniform3(-5.0f64..5.0)) {
        let model = make_test_humanoid(3);
        let scene = terrain_scene();
        let bvh = Bvh::new(Arc::new(scene.clone())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body = posed(&model, &random_placement(&model, &mut rng).unwrap());
        let cfg = ContactConfig::default();
        let g = RigidTransform::new(rotation::exp(&Vec3::from(aa)), Vec3::from(t)).unwrap();
        let moved_scene = Bvh::new(Arc::new(scene.map_vertices(|v| g.apply(v)).unwrap())).unwrap();
        let moved_body = body.map_vertices(|v| g.apply(v)).unwrap();
        let a = annotate_contact("t", body.vertices(), body.vertex_normals(), model.regions(), &bvh, &cfg, Execution::Sequential).unwrap();
        let b = annotate_contact("t", moved_body.vertices(), moved_body.vertex_normals(), model.regions(), &moved_scene, &cfg, Execution::Sequential).unwrap();
        // Rounding can only matter for vertices that sit on a decision
        // boundary; skip those.
        for (v, (n, (r, (x, y)))) in body.vertices().iter().zip(body.vertex_normals().iter().zip(model.regions().iter().zip(a.labels.iter().zip(&b.labels)))) {
            let hit = bvh.closest_point(v);
            let margin_d = (hit.distance - cfg.threshold(*r)).abs();
            let margin_n = n.dot(&-hit.normal).abs();
            if margin_d > 1e-9 && margin_n > 1e-9 {
                prop_assert_eq!(x, y);
            }
        }
    }
}
