use forestseg::features::{eigen_features, geometric_features, GeometricFeatureVector};
use forestseg::forest::class_weights_balanced;
use forestseg::io::{
    read_channel_cloud, read_multispectral_cloud, split_train_test, write_channel_cloud,
    write_multispectral_cloud, CloudFormat, SplitSpec, SplitUnit,
};
use forestseg::metrics::{metrics, ConfusionMatrix, WiouWeights};
use forestseg::preprocess::{normalize_height, robust_minmax_scale, HeightNormParams};
use forestseg::spectral::{db_to_linear, vi_separability, VegetationIndexKind};
use forestseg::{
    Channel, ChannelCloud, ChannelPoint, MultispectralCloud, MultispectralPoint, SemanticClass,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn neighborhood() -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), 4..60)
}

fn class() -> impl Strategy<Value = SemanticClass> {
    (0u8..6).prop_map(|c| SemanticClass::from_code(c).unwrap())
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> MultispectralCloud {
    let points = (0..n)
        .map(|_| MultispectralPoint {
            x: rng.random_range(-50.0..50.0),
            y: rng.random_range(-50.0..50.0),
            z: rng.random_range(100.0..130.0),
            z_normalized: Some(rng.random_range(0.0..30.0)),
            reflectance_db: [0; 3].map(|_| rng.random_range(-25.0f32..5.0)),
            label: SemanticClass::from_code(rng.random_range(0..6)),
        })
        .collect();
    MultispectralCloud::new(points, "random cloud").unwrap()
}

fn ratio_features(f: &GeometricFeatureVector) -> [f64; 8] {
    [
        f.linearity,
        f.planarity,
        f.sphericity,
        f.verticality,
        f.eigenentropy,
        f.anisotropy,
        f.pca1,
        f.pca2,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn features_ignore_rotation_about_vertical(pts in neighborhood(), angle in 0.0f64..std::f64::consts::TAU) {
        let (s, c) = angle.sin_cos();
        let rotated: Vec<[f64; 3]> = pts.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]).collect();
        let (a, b) = (eigen_features(&pts).unwrap(), eigen_features(&rotated).unwrap());
        for (x, y) in ratio_features(&a).iter().zip(ratio_features(&b)) {
            prop_assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
        }
        prop_assert!((a.omnivariance - b.omnivariance).abs() <= 1e-6);
    }

    #[test]
    fn features_scale_with_square_of_size(pts in neighborhood(), scale in 0.1f64..10.0) {
        let scaled: Vec<[f64; 3]> = pts.iter().map(|p| p.map(|v| v * scale)).collect();
        let (a, b) = (eigen_features(&pts).unwrap(), eigen_features(&scaled).unwrap());
        prop_assert!((b.eigenvalue_sum - scale * scale * a.eigenvalue_sum).abs() <= 1e-9 * b.eigenvalue_sum.max(1.0));
        for (x, y) in ratio_features(&a).iter().zip(ratio_features(&b)).take(3) {
            prop_assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn far_point_leaves_rows_unchanged(pts in prop::collection::vec(prop::array::uniform3(0.0f64..3.0), 5..200)) {
        let before = geometric_features(&pts, 1.0).unwrap();
        let mut more = pts.clone();
        more.push([100.0, 100.0, 100.0]);
        let after = geometric_features(&more, 1.0).unwrap();
        prop_assert_eq!(&after[..pts.len()], &before[..]);
        prop_assert!(after[pts.len()].degenerate);
    }

    #[test]
    fn db_sum_is_linear_product(a in -60.0f64..30.0, b in -60.0f64..30.0) {
        let lhs = db_to_linear(a + b).unwrap();
        let rhs = db_to_linear(a).unwrap() * db_to_linear(b).unwrap();
        prop_assert!(((lhs - rhs) / rhs).abs() <= 1e-12);
    }

    #[test]
    fn robust_minmax_ignores_positive_affine_maps(
        values in prop::collection::vec(-100.0f64..100.0, 2..200),
        a in 0.01f64..100.0,
        b in -1000.0f64..1000.0,
    ) {
        let mapped: Vec<f64> = values.iter().map(|v| a * v + b).collect();
        let (x, y) = (robust_minmax_scale(&values), robust_minmax_scale(&mapped));
        for (p, q) in x.iter().zip(&y) {
            prop_assert!((0.0..=1.0).contains(p));
            prop_assert!((p - q).abs() <= 1e-9, "{p} vs {q}");
        }
    }

    #[test]
    fn metrics_are_scale_free_and_bounded(
        pairs in prop::collection::vec((class(), class()), 1..300),
        k in 1u64..50,
    ) {
        let (truth, pred): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let cm = ConfusionMatrix::from_labels(&truth, &pred).unwrap();
        let mut scaled = cm;
        scaled.counts.iter_mut().flatten().for_each(|v| *v *= k);
        let w = WiouWeights::default();
        let (a, b) = (metrics(&cm, &w).unwrap(), metrics(&scaled, &w).unwrap());
        prop_assert_eq!(a, b);
        for v in [a.oa, a.macc, a.miou, a.wiou] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        for c in SemanticClass::ALL {
            if let (Some(iou), Some(recall)) = (a.per_class_iou[c], a.per_class_recall[c]) {
                prop_assert!(iou <= recall);
            }
        }
        let uniform = metrics(&cm, &WiouWeights::uniform()).unwrap();
        prop_assert_eq!(uniform.wiou, uniform.miou);
    }

    #[test]
    fn balanced_weights_compensate_duplication(
        labels in prop::collection::vec(class(), 1..200),
        k in 2usize..5,
        dup in class(),
    ) {
        let mut more = labels.clone();
        for l in &labels {
            if *l == dup {
                more.extend(std::iter::repeat_n(*l, k - 1));
            }
        }
        let (w1, w2) = (class_weights_balanced(&labels).unwrap(), class_weights_balanced(&more).unwrap());
        let count = |ls: &[SemanticClass], c| ls.iter().filter(|&&l| l == c).count() as f64;
        for c in SemanticClass::ALL {
            let (p1, p2) = (w1[c] * count(&labels, c), w2[c] * count(&more, c));
            // weight * count = N / K, and the class count K is unchanged.
            prop_assert!((p1 / labels.len() as f64 - p2 / more.len() as f64).abs() <= 1e-12);
        }
    }
}

#[test]
fn confusion_rows_match_truth_histogram() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draw = |rng: &mut ChaCha8Rng| SemanticClass::from_code(rng.random_range(0..6)).unwrap();
    let truth: Vec<_> = (0..10_000).map(|_| draw(&mut rng)).collect();
    let pred: Vec<_> = (0..10_000).map(|_| draw(&mut rng)).collect();
    let cm = ConfusionMatrix::from_labels(&truth, &pred).unwrap();
    for c in SemanticClass::ALL {
        assert_eq!(
            cm.truth_count(c),
            truth.iter().filter(|&&t| t == c).count() as u64
        );
        assert_eq!(
            cm.predicted_count(c),
            pred.iter().filter(|&&p| p == c).count() as u64
        );
    }
    assert_eq!(cm.total(), 10_000);
}

#[test]
fn binary_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = random_cloud(&mut rng, 10_000);
        let path = dir.path().join(format!("cloud{seed}.bin"));
        write_multispectral_cloud(&cloud, &path, CloudFormat::Binary).unwrap();
        let back = read_multispectral_cloud(&path).unwrap();
        assert_eq!(back, cloud);
        for (a, b) in back.points().iter().zip(cloud.points()) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(
                a.z_normalized.unwrap().to_bits(),
                b.z_normalized.unwrap().to_bits()
            );
        }

        let channel = ChannelCloud::new(
            Channel::Green,
            cloud
                .points()
                .iter()
                .map(|p| ChannelPoint {
                    x: p.x,
                    y: p.y,
                    z: p.z,
                    reflectance_db: p.reflectance_db[2],
                    channel: Channel::Green,
                    label: p.label,
                })
                .collect(),
        )
        .unwrap();
        let path = dir.path().join(format!("green{seed}.bin"));
        write_channel_cloud(&channel, &path, CloudFormat::Binary).unwrap();
        assert_eq!(read_channel_cloud(&path, Channel::Green).unwrap(), channel);
        assert!(read_channel_cloud(&path, Channel::Nir).is_err());
    }
}

#[test]
fn text_round_trip_keeps_labels_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cloud = random_cloud(&mut rng, 500);
    let path = dir.path().join("cloud.txt");
    write_multispectral_cloud(&cloud, &path, CloudFormat::Text).unwrap();
    let back = read_multispectral_cloud(&path).unwrap();
    assert_eq!(back.labels().unwrap(), cloud.labels().unwrap());
    for (a, b) in back.points().iter().zip(cloud.points()) {
        assert!((a.x - b.x).abs() < 1e-8 && (a.z - b.z).abs() < 1e-8);
        for c in 0..3 {
            assert!((a.reflectance_db[c] - b.reflectance_db[c]).abs() < 1e-5);
        }
    }
}

#[test]
fn per_point_split_partitions_the_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let clouds = vec![random_cloud(&mut rng, 137), random_cloud(&mut rng, 64)];
    let spec = SplitSpec {
        seed: 5,
        unit: SplitUnit::PerPoint,
        ..Default::default()
    };
    let split = split_train_test(&clouds, &spec).unwrap();
    let key = |p: &MultispectralPoint| (p.x.to_bits(), p.y.to_bits(), p.z.to_bits());
    let mut all: Vec<_> = clouds
        .iter()
        .flat_map(|c| c.points().iter().map(key))
        .collect();
    let mut parts: Vec<_> = split
        .train
        .iter()
        .chain(&split.test)
        .flat_map(|c| c.points().iter().map(key))
        .collect();
    all.sort_unstable();
    parts.sort_unstable();
    assert_eq!(all, parts);
    let n_train: usize = split.train.iter().map(MultispectralCloud::len).sum();
    assert_eq!(n_train, (201.0f64 * 0.8).round() as usize);
}

#[test]
fn height_normalization_ignores_vertical_offset() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cloud = random_cloud(&mut rng, 2000);
    let lifted = MultispectralCloud::new(
        cloud
            .points()
            .iter()
            .map(|p| MultispectralPoint {
                z: p.z + 250.0,
                ..*p
            })
            .collect(),
        "",
    )
    .unwrap();
    let params = HeightNormParams::default();
    let (a, b) = (
        normalize_height(&cloud, &params).unwrap(),
        normalize_height(&lifted, &params).unwrap(),
    );
    let min = a
        .points()
        .iter()
        .map(|p| p.z_normalized.unwrap())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(min, 0.0);
    for (p, q) in a.points().iter().zip(b.points()) {
        assert!((p.z_normalized.unwrap() - q.z_normalized.unwrap()).abs() < 1e-9);
    }
}

#[test]
fn separability_ignores_point_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cloud = random_cloud(&mut rng, 3000);
    let mut order: Vec<usize> = (0..cloud.len()).collect();
    order.reverse();
    let shuffled = cloud.select(&order);
    for kind in VegetationIndexKind::ALL {
        let (a, b) = (
            vi_separability(&cloud, kind).unwrap(),
            vi_separability(&shuffled, kind).unwrap(),
        );
        assert_eq!(a.score, b.score);
    }
}
