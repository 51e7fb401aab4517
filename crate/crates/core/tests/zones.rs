mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rzones::fpca::ScoreVector;
use rzones::zones::{adjusted_rand_index, cluster, membership_vector, zone_counts_default, ClusterSettings, ZoneModel};

fn blobs(seed: u64, per: usize) -> Vec<ScoreVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [(0.0, 0.0), (8.0, 1.0), (3.0, 9.0)];
    let mut out = Vec::new();
    for (k, (x, y)) in centers.iter().enumerate() {
        for i in 0..per {
            out.push(ScoreVector {
                site: (k, i),
                scores: vec![x + rng.random_range(-1.0..1.0), y + rng.random_range(-1.0..1.0)],
            });
        }
    }
    out
}

fn settings(zones: usize) -> ClusterSettings {
    ClusterSettings { zones, seed: 3, ..ClusterSettings::default() }
}

#[test]
fn partition_survives_rotation_and_translation() {
    let pts = blobs(1, 30);
    let base = cluster(&pts, &settings(3)).unwrap();
    let (s, c) = 0.7f64.sin_cos();
    let moved: Vec<ScoreVector> = pts
        .iter()
        .map(|p| ScoreVector {
            site: p.site,
            scores: vec![c * p.scores[0] - s * p.scores[1] + 5.0, s * p.scores[0] + c * p.scores[1] - 2.0],
        })
        .collect();
    let other = cluster(&moved, &settings(3)).unwrap();
    assert_eq!(adjusted_rand_index(&base.assignments, &other.assignments).unwrap(), 1.0);
    let truth: Vec<usize> = pts.iter().map(|p| p.site.0).collect();
    assert_eq!(adjusted_rand_index(&base.assignments, &truth).unwrap(), 1.0);
}

#[test]
fn membership_matches_closed_form() {
    let centroids = vec![vec![0.0, 0.0], vec![4.0, 0.0], vec![1.0, 3.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for m in [1.5, 2.0, 3.0] {
        for _ in 0..50 {
            let p: [f64; 2] = [rng.random_range(-3.0..6.0), rng.random_range(-3.0..6.0)];
            let d: Vec<f64> = centroids.iter().map(|c| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt()).collect();
            let u = membership_vector(&centroids, m, &p);
            for j in 0..3 {
                let want = 1.0 / d.iter().map(|dk| (d[j] / dk).powf(2.0 / (m - 1.0))).sum::<f64>();
                assert!((u[j] - want).abs() < 1e-12, "m={m} j={j} {} vs {want}", u[j]);
            }
        }
    }
    assert_eq!(membership_vector(&centroids, 2.0, &[4.0, 0.0]), vec![0.0, 1.0, 0.0]);
}

#[test]
fn objective_never_increases_and_rows_sum_to_one() {
    let model = cluster(&blobs(5, 40), &ClusterSettings { zones: 4, seed: 8, ..ClusterSettings::default() }).unwrap();
    assert!(model.converged);
    for w in model.objective_history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
    for row in &model.memberships {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(row.iter().all(|&u| (0.0..=1.0).contains(&u)));
    }
}

#[test]
fn toy_field_zones_are_column_bands() {
    let toy = common::toy(12, 2);
    let map = toy.zones.zone_map(&toy.field).unwrap();
    let mut band = Vec::new();
    for c in 0..12 {
        let z = map.get(2, c);
        for r in 0..12 {
            let id = map.get(r, c);
            if id >= 0 {
                assert_eq!(id, z, "column {c} is split");
            }
        }
        band.push(z);
    }
    let changes = band.windows(2).filter(|w| w[0] != w[1]).count();
    assert_eq!(changes, 2, "{band:?}");
}

#[test]
fn degenerate_inputs_are_rejected() {
    let same: Vec<ScoreVector> = (0..6).map(|i| ScoreVector { site: (0, i), scores: vec![1.0, 2.0] }).collect();
    assert!(cluster(&same, &settings(3)).is_err());
    assert!(cluster(&blobs(1, 1)[..2], &settings(3)).is_err());
    assert!(cluster(&blobs(1, 5), &ClusterSettings { fuzzifier: 1.0, ..settings(3) }).is_err());
    let two = vec![
        ScoreVector { site: (0, 0), scores: vec![0.0] },
        ScoreVector { site: (0, 1), scores: vec![1.0] },
    ];
    let model = cluster(&two, &settings(2)).unwrap();
    assert_ne!(model.assignments[0], model.assignments[1]);
}

#[test]
fn zone_count_profiles() {
    assert_eq!(zone_counts_default("heterogeneous", None).unwrap(), 4);
    assert_eq!(zone_counts_default("homogeneous", None).unwrap(), 3);
    assert_eq!(zone_counts_default("homogeneous", Some(6)).unwrap(), 6);
    assert!(zone_counts_default("homogeneous", Some(1)).is_err());
    assert!(zone_counts_default("homogeneous", Some(9)).is_err());
    assert!(zone_counts_default("rocky", None).is_err());
}

#[test]
fn model_and_map_files() {
    let toy = common::toy(8, 0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zones.json");
    toy.zones.save(&path).unwrap();
    assert_eq!(ZoneModel::load(&path).unwrap(), toy.zones);

    let map = toy.zones.zone_map(&toy.field).unwrap();
    let pgm = map.to_pgm();
    let header = b"P5\n8 8\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    assert_eq!(pgm.len(), header.len() + 64);
    // three zones map to gray levels 0, 100 and 200
    for (&z, &g) in map.ids.iter().zip(&pgm[header.len()..]) {
        assert_eq!(g as i32, z * 100);
    }
    let csv = map.to_csv();
    assert_eq!(csv.lines().count(), 8);
    assert!(csv.lines().all(|l| l.split(',').count() == 8));
}
