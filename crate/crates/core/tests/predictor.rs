use hsc_core::body::make_test_humanoid;
use hsc_core::contact::ContactVector;
use hsc_core::metrics::contact_prf;
use hsc_core::predictor::{
    bce_loss, mvm_mask, predict, train_classifier, Classifier, TrainConfig, VertexFeatures, FEATURE_DIM,
};
use hsc_core::synthetic::height_contact_dataset;
use hsc_core::Error;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy(seed: u64, n: usize) -> (VertexFeatures, ContactVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, FEATURE_DIM, |_, c| if c + 1 == FEATURE_DIM { 0.0 } else { rng.random_range(-1.0..1.0) });
    let labels = (0..n).map(|_| rng.random_bool(0.4)).collect();
    (VertexFeatures::new("t", x).unwrap(), ContactVector::new("t", labels))
}

#[test]
fn bce_matches_naive_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = rng.random_range(1..50);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let c: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let mut naive = 0.0;
        for i in 0..n {
            let q = p[i].clamp(1e-7, 1.0 - 1e-7);
            naive += if c[i] { -q.ln() } else { -(1.0 - q).ln() };
        }
        naive /= n as f64;
        let got = bce_loss(&p, &ContactVector::new("t", c)).unwrap();
        assert!((got - naive).abs() < 1e-12);
    }
}

#[test]
fn gradients_match_finite_differences() {
    let (x, c) = toy(5, 10);
    let clf = Classifier::new(FEATURE_DIM, 8, 11);
    let (_, g) = clf.loss_and_gradients(&x, &c).unwrap();
    let loss = |m: &Classifier| bce_loss(&m.probabilities(&x).unwrap(), &c).unwrap();
    let h = 1e-6;
    let check = |analytic: f64, perturb: &dyn Fn(&mut Classifier, f64)| {
        let (mut a, mut b) = (clf.clone(), clf.clone());
        perturb(&mut a, h);
        perturb(&mut b, -h);
        let fd = (loss(&a) - loss(&b)) / (2.0 * h);
        let scale = fd.abs().max(analytic.abs()).max(1e-6);
        assert!((fd - analytic).abs() <= 1e-4 * scale, "fd {fd} vs analytic {analytic}");
    };
    for k in 0..8 {
        for d in 0..FEATURE_DIM - 1 {
            check(g.w1[(k, d)], &|m, e| m.w1[(k, d)] += e);
        }
        check(g.b1[k], &|m, e| m.b1[k] += e);
        check(g.w2[k], &|m, e| m.w2[k] += e);
    }
    check(g.b2, &|m, e| m.b2 += e);
}

#[test]
fn mask_contract() {
    let (x, _) = toy(1, 100);
    let m = mvm_mask(&x, 0.3, 4).unwrap();
    assert_eq!(m.masked_count(), 30);
    assert_eq!(m, mvm_mask(&x, 0.3, 4).unwrap());
    assert_ne!(m, mvm_mask(&x, 0.3, 5).unwrap());
    for v in 0..100 {
        if m.is_masked(v) {
            assert!(m.values.row(v).iter().take(FEATURE_DIM - 1).all(|&f| f == 0.0));
        } else {
            assert_eq!(m.values.row(v), x.values.row(v));
        }
    }
    assert_eq!(mvm_mask(&x, 0.0, 4).unwrap(), x);
}

#[test]
fn masked_vertices_stay_supervised() {
    let (x, c) = toy(2, 100);
    let m = mvm_mask(&x, 0.3, 9).unwrap();
    let clf = Classifier::new(FEATURE_DIM, 16, 0);
    let p = clf.probabilities(&m).unwrap();
    let masked: Vec<usize> = (0..100).filter(|&v| m.is_masked(v)).collect();
    let pm: Vec<f64> = masked.iter().map(|&v| p[v]).collect();
    let cm = ContactVector::new("t", masked.iter().map(|&v| c.labels[v]).collect());
    assert!(bce_loss(&pm, &cm).unwrap() > 0.01);
}

#[test]
fn prediction_is_total_and_consistent() {
    let (mut x, _) = toy(3, 50);
    let clf = Classifier::new(FEATURE_DIM, 16, 1);
    let before = predict(&clf, &x).unwrap();
    assert_eq!(before, predict(&clf, &x).unwrap());
    let p = before.probabilities.clone().unwrap();
    assert_eq!(before.labels, p.iter().map(|&q| q >= 0.5).collect::<Vec<_>>());
    x.mask(0..50);
    let all_masked = predict(&clf, &x).unwrap();
    assert!(all_masked.probabilities.unwrap().iter().all(|q| q.is_finite()));
}

#[test]
fn weights_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.txt");
    let clf = Classifier::new(FEATURE_DIM, 7, 3);
    clf.save(&path).unwrap();
    assert_eq!(Classifier::load(&path).unwrap(), clf);
    std::fs::write(&path, "classifier 3\n").unwrap();
    assert!(matches!(Classifier::load(&path), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn training_rejects_bad_input() {
    assert!(matches!(train_classifier(&[], &TrainConfig::default()), Err(Error::Empty(_))));
    let (x, _) = toy(1, 5);
    let c = ContactVector::new("t", vec![true; 4]);
    assert!(train_classifier(&[(x, c)], &TrainConfig::default()).is_err());
}

#[test]
fn training_is_deterministic() {
    let data = vec![toy(1, 40), toy(2, 40)];
    let cfg = TrainConfig { epochs: 5, hidden: 8, ..Default::default() };
    let a = train_classifier(&data, &cfg).unwrap();
    let b = train_classifier(&data, &cfg).unwrap();
    assert_eq!(a.classifier, b.classifier);
    assert_eq!(a.log, b.log);
}

fn mean_f1(clf: &Classifier, test: &[(VertexFeatures, ContactVector)], mask: f64) -> f64 {
    let total: f64 = test
        .iter()
        .enumerate()
        .map(|(i, (x, c))| {
            let x = mvm_mask(x, mask, 1000 + i as u64).unwrap();
            contact_prf(&predict(clf, &x).unwrap(), c).unwrap().2
        })
        .sum();
    total / test.len() as f64
}

#[test]
fn learns_height_contact_and_masking_helps_under_occlusion() {
    let model = make_test_humanoid(0);
    let data = height_contact_dataset(&model, 200, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let (train, test) = data.split_at(160);

    let plain = train_classifier(train, &TrainConfig { mask_fraction: 0.0, ..Default::default() }).unwrap();
    assert!(plain.log.windows(2).all(|w| w[1].loss <= w[0].loss), "loss increased");
    let f1 = mean_f1(&plain.classifier, test, 0.0);
    assert!(f1 >= 0.95, "held-out F1 {f1}");

    let mvm = train_classifier(train, &TrainConfig { mask_fraction: 0.3, ..Default::default() }).unwrap();
    let (occluded_plain, occluded_mvm) = (mean_f1(&plain.classifier, test, 0.3), mean_f1(&mvm.classifier, test, 0.3));
    assert!(occluded_mvm >= occluded_plain + 0.05, "{occluded_mvm} vs {occluded_plain}");
    assert!(mean_f1(&mvm.classifier, test, 0.0) >= f1 - 0.05);

    let heavy = train_classifier(train, &TrainConfig { mask_fraction: 0.5, ..Default::default() }).unwrap();
    assert!(plain.log.last().unwrap().loss < heavy.log.last().unwrap().loss);
}
