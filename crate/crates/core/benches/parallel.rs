use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hsc_core::body::make_test_humanoid;
use hsc_core::camera::{consensus_weights, ConsensusConfig, KeypointSet};
use hsc_core::contact::{annotate_contact, ContactConfig};
use hsc_core::fitting::{fit_batch, EnergyConfig, Weighting};
use hsc_core::geometry::{Bvh, Mesh, Vec3};
use hsc_core::synthetic::{perturb, project_keypoints, random_placement, ring_cameras, terrain_scene, walking_pose};
use hsc_core::Execution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn contact(c: &mut Criterion) {
    let model = make_test_humanoid(0);
    let scene = Bvh::new(Arc::new(terrain_scene())).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let bodies: Vec<Mesh> = (0..16)
        .map(|_| {
            let p = random_placement(&model, &mut rng).unwrap();
            Mesh::new(model.pose_body(&p).unwrap().vertices, model.faces().to_vec()).unwrap()
        })
        .collect();
    let cfg = ContactConfig::default();
    let mut group = c.benchmark_group("annotate_contact");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                for m in &bodies {
                    annotate_contact("test-humanoid", m.vertices(), m.vertex_normals(), model.regions(), &scene, &cfg, exec)
                        .unwrap();
                }
            })
        });
    }
    group.finish();
}

fn consensus(c: &mut Criterion) {
    let model = make_test_humanoid(0);
    let cams = ring_cameras(8, 4.0, 1.5, Vec3::new(0.0, 0.0, 1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let kp = project_keypoints(&model, &walking_pose(&model, 0.3), &cams, 3.0, &mut rng).unwrap();
    let cfg = ConsensusConfig::default();
    let mut group = c.benchmark_group("consensus_weights");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| consensus_weights(&cams, &kp, &cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn fitting(c: &mut Criterion) {
    let model = make_test_humanoid(0);
    let cams = ring_cameras(4, 4.0, 1.5, Vec3::new(0.0, 0.0, 1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let truth: Vec<_> = (0..8).map(|t| walking_pose(&model, t as f64 / 8.0)).collect();
    let keypoints: Vec<KeypointSet> =
        truth.iter().map(|p| project_keypoints(&model, p, &cams, 1.0, &mut rng).unwrap()).collect();
    let inits: Vec<_> = truth.iter().map(|p| perturb(p, &mut rng, 5f64.to_radians(), 0.03)).collect();
    let cfg = EnergyConfig { window: 2, max_iterations: 20, ..Default::default() };
    let mut group = c.benchmark_group("fit_batch");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| fit_batch(&model, &cams, &keypoints, &inits, &cfg, &Weighting::default(), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, contact, consensus, fitting);
criterion_main!(benches);
