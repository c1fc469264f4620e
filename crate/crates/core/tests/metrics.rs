use std::collections::BTreeMap;

use hsc_core::body::make_test_humanoid;
use hsc_core::contact::ContactVector;
use hsc_core::geometry::{grid_mesh, EdgeGraph, Mesh, Vec3};
use hsc_core::metrics::{
    aggregate, aggregate_scores, contact_geodesic_error, contact_prf, mpjpe, score_frame, v2v, AlignMode, ContactScore,
    Counts, SeenFlags, Subset,
};
use hsc_core::rotation;
use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-vertex Dijkstra from every predicted vertex, built from the face list.
fn dijkstra_oracle(mesh: &Mesh, pred: &[usize], gt: &[usize]) -> f64 {
    let mut g = UnGraph::<(), f64>::new_undirected();
    let nodes: Vec<NodeIndex> = (0..mesh.vertex_count()).map(|_| g.add_node(())).collect();
    let mut seen = std::collections::HashSet::new();
    for f in mesh.faces() {
        for k in 0..3 {
            let (a, b) = (f[k].min(f[(k + 1) % 3]), f[k].max(f[(k + 1) % 3]));
            if seen.insert((a, b)) {
                g.add_edge(nodes[a], nodes[b], (mesh.vertices()[a] - mesh.vertices()[b]).norm());
            }
        }
    }
    let total: f64 = pred
        .iter()
        .map(|&p| {
            let d = dijkstra(&g, nodes[p], None, |e| *e.weight());
            gt.iter().filter_map(|v| d.get(&nodes[*v]).copied()).fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / pred.len() as f64
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, max: usize) -> Vec<usize> {
    let k = rng.random_range(1..=max);
    let mut v: Vec<usize> = (0..k).map(|_| rng.random_range(0..n)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

fn labels(n: usize, set: &[usize]) -> ContactVector {
    let mut l = vec![false; n];
    for &i in set {
        l[i] = true;
    }
    ContactVector::new("t", l)
}

fn check_geodesic_oracle(mesh: &Mesh, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = mesh.vertex_count();
    for _ in 0..100 {
        let pred = random_set(&mut rng, n, 20);
        let gt = random_set(&mut rng, n, 20);
        let got = contact_geodesic_error(&labels(n, &pred), &labels(n, &gt), mesh).unwrap().unwrap();
        let want = dijkstra_oracle(mesh, &pred, &gt);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn geodesic_matches_dijkstra_on_grid() {
    check_geodesic_oracle(&grid_mesh(10, 10, 0.1), 1);
}

#[test]
fn geodesic_matches_dijkstra_on_humanoid() {
    check_geodesic_oracle(&make_test_humanoid(0).template_mesh().unwrap(), 2);
}

#[test]
fn geodesic_spot_values() {
    let mesh = grid_mesh(10, 10, 0.1);
    let n = mesh.vertex_count();
    assert_eq!(contact_geodesic_error(&labels(n, &[3, 4]), &labels(n, &[3, 4, 5]), &mesh).unwrap(), Some(0.0));
    let d = contact_geodesic_error(&labels(n, &[1]), &labels(n, &[0]), &mesh).unwrap().unwrap();
    assert!((d - 0.1).abs() < 1e-12);
    assert_eq!(contact_geodesic_error(&labels(n, &[]), &labels(n, &[0]), &mesh).unwrap(), None);
    assert_eq!(contact_geodesic_error(&labels(n, &[1]), &labels(n, &[]), &mesh).unwrap(), None);
}

#[test]
fn geodesic_rejects_empty_mesh() {
    let empty = Mesh::new(vec![], vec![]);
    if let Ok(mesh) = empty {
        assert!(contact_geodesic_error(&labels(0, &[]), &labels(0, &[]), &mesh).is_err());
    }
}

fn joints(seed: u64, n: usize) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0))).collect()
}

#[test]
fn mpjpe_identity_and_rotation() {
    let gt = joints(3, 24);
    for mode in [AlignMode::Procrustes, AlignMode::Pelvis] {
        assert!(mpjpe(&gt, &gt, mode, 0).unwrap().abs() < 1e-9);
    }
    let r = rotation::exp(&(Vec3::z() * 30f64.to_radians()));
    let rotated: Vec<Vec3> = gt.iter().map(|p| r * p).collect();
    assert!(mpjpe(&rotated, &gt, AlignMode::Procrustes, 0).unwrap().abs() < 1e-9);
    assert!(mpjpe(&rotated, &gt, AlignMode::Pelvis, 0).unwrap() > 1.0);
}

#[test]
fn mpjpe_matches_mean_of_norms() {
    let gt = joints(4, 24);
    let mut pred = gt.clone();
    pred[5] += Vec3::new(0.006, 0.0, 0.008);
    let tr = mpjpe(&pred, &gt, AlignMode::Pelvis, 0).unwrap();
    let oracle: f64 = pred.iter().zip(&gt).map(|(a, b)| (a - b).norm() * 1000.0).sum::<f64>() / 24.0;
    assert!((tr - oracle).abs() < 1e-9);
    assert!((tr - 10.0 / 24.0).abs() < 1e-9);
    // A pelvis offset is removed entirely.
    let shifted: Vec<Vec3> = pred.iter().map(|p| p + Vec3::new(0.3, -0.2, 0.1)).collect();
    assert!((mpjpe(&shifted, &gt, AlignMode::Pelvis, 0).unwrap() - tr).abs() < 1e-9);
}

#[test]
fn v2v_and_mismatch() {
    let gt = joints(5, 50);
    let pred: Vec<Vec3> = gt.iter().map(|p| p + Vec3::new(0.01, 0.0, 0.0)).collect();
    assert!((v2v(&pred, &gt, AlignMode::Pelvis, Vec3::zeros(), Vec3::zeros()).unwrap() - 10.0).abs() < 1e-9);
    assert!(v2v(&pred, &gt, AlignMode::Pelvis, Vec3::x() * 0.01, Vec3::zeros()).unwrap() < 1e-9);
    assert!(mpjpe(&pred[..10], &gt, AlignMode::Pelvis, 0).is_err());
}

fn score(f1: f64, geo: Option<f64>) -> ContactScore {
    ContactScore {
        precision: f1,
        recall: f1,
        f1,
        geodesic_error: geo,
        counts: Counts::default(),
        frames_evaluated: 1,
        geodesic_excluded: usize::from(geo.is_none()),
    }
}

#[test]
fn geodesic_mean_skips_excluded_frames() {
    let a = aggregate(&[score(0.5, Some(0.02)), score(0.7, None), score(0.9, Some(0.04))]).unwrap();
    assert!((a.geodesic_error.unwrap() - 0.03).abs() < 1e-15);
    assert_eq!(a.geodesic_excluded, 1);
    assert_eq!(a.frames_evaluated, 3);
}

#[test]
fn subset_aggregation_matches_independent_grouping() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let flags = [
        SeenFlags { scene: false, hsi: true, subject: true },
        SeenFlags { scene: true, hsi: false, subject: false },
        SeenFlags { scene: false, hsi: false, subject: false },
    ];
    let frames: Vec<(ContactScore, SeenFlags)> = (0..60)
        .map(|_| (score(rng.random_range(0.0..1.0), Some(rng.random_range(0.0..0.2))), flags[rng.random_range(0..3)]))
        .collect();
    let rows = aggregate_scores(&frames).unwrap();
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (s, f) in &frames {
        let key = match (f.scene, f.hsi, f.subject) {
            (false, true, true) => "a",
            (true, false, false) => "c",
            _ => "f",
        };
        groups.entry(key.into()).or_default().push(s.f1);
    }
    groups.insert("g".into(), frames.iter().map(|(s, _)| s.f1).collect());
    assert_eq!(rows.len(), 4);
    for row in &rows {
        let v = &groups[&row.subset.to_string()];
        assert!((row.score.f1 - v.iter().sum::<f64>() / v.len() as f64).abs() < 1e-12);
        assert_eq!(row.score.frames_evaluated, v.len());
    }
    assert_eq!(rows.last().unwrap().subset, Subset::Full);
}

#[test]
fn subsets_partition_frames() {
    let all: Vec<SeenFlags> = (0..8).map(|i| SeenFlags { scene: i & 1 == 1, hsi: i & 2 == 2, subject: i & 4 == 4 }).collect();
    let frames: Vec<(ContactScore, SeenFlags)> = all.iter().map(|f| (score(0.5, None), *f)).collect();
    let rows = aggregate_scores(&frames).unwrap();
    let per_subset: usize = rows.iter().filter(|r| r.subset != Subset::Full).map(|r| r.score.frames_evaluated).sum();
    assert_eq!(per_subset, 8);
    assert_eq!(rows.len(), 9);
    for (i, s) in Subset::TABLE[..6].iter().enumerate() {
        assert_eq!(rows[i].subset, *s);
    }
}

#[test]
fn identical_labels_score_perfectly() {
    let mesh = make_test_humanoid(1).template_mesh().unwrap();
    let graph = EdgeGraph::from_mesh(&mesh);
    let gt = labels(mesh.vertex_count(), &[0, 10, 20, 30]);
    let s = score_frame(&gt, &gt, &graph).unwrap();
    assert_eq!((s.precision, s.recall, s.f1, s.geodesic_error), (1.0, 1.0, 1.0, Some(0.0)));
}

fn bits(n: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), n)
}

proptest! {
    #[test]
    fn prf_swaps_under_exchange(a in bits(40), b in bits(40)) {
        let (pa, ra, fa) = contact_prf(&ContactVector::new("t", a.clone()), &ContactVector::new("t", b.clone())).unwrap();
        let (pb, rb, fb) = contact_prf(&ContactVector::new("t", b), &ContactVector::new("t", a)).unwrap();
        prop_assert_eq!((pa, ra), (rb, pb));
        prop_assert!((fa - fb).abs() < 1e-15);
    }

    #[test]
    fn f1_between_precision_and_recall(a in bits(40), b in bits(40)) {
        let (p, r, f) = contact_prf(&ContactVector::new("t", a), &ContactVector::new("t", b)).unwrap();
        prop_assert!(p.min(r) - 1e-15 <= f && f <= p.max(r) + 1e-15);
        if p + r > 0.0 {
            prop_assert!((f - 2.0 * p * r / (p + r)).abs() < 1e-15);
        }
    }

    #[test]
    fn geodesic_zero_iff_subset(a in bits(100), b in bits(100)) {
        let mesh = grid_mesh(10, 10, 0.1);
        let pred = ContactVector::new("t", a.clone());
        let gt = ContactVector::new("t", b.clone());
        if let Some(d) = contact_geodesic_error(&pred, &gt, &mesh).unwrap() {
            let subset = a.iter().zip(&b).all(|(&p, &g)| !p || g);
            prop_assert_eq!(d == 0.0, subset);
            prop_assert!(d >= 0.0);
        }
    }

    #[test]
    fn pa_invariant_to_similarity(
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in 0.0f64..3.0,
        scale in 0.3f64..3.0,
        shift in prop::array::uniform3(-2.0f64..2.0),
        seed in 0u64..1000,
    ) {
        let gt = joints(seed, 24);
        let mut pred = gt.clone();
        for (i, p) in pred.iter_mut().enumerate() {
            *p += Vec3::new(0.01 * (i as f64).sin(), 0.02 * (i as f64).cos(), 0.005);
        }
        let a = Vec3::from(axis);
        prop_assume!(a.norm() > 1e-3);
        let r = rotation::exp(&(a.normalize() * angle));
        let moved: Vec<Vec3> = pred.iter().map(|p| r * p * scale + Vec3::from(shift)).collect();
        let e0 = mpjpe(&pred, &gt, AlignMode::Procrustes, 0).unwrap();
        let e1 = mpjpe(&moved, &gt, AlignMode::Procrustes, 0).unwrap();
        prop_assert!((e0 - e1).abs() < 1e-9, "{} vs {}", e0, e1);
    }
}
