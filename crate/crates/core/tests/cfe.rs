mod common;

use common::{toy, Toy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rzones::cfe::{
    apply_candidate, eval_g1, eval_g2, eval_g3, evaluate, explain_site, nsga2, read_jsonl, select, write_jsonl, CfeProblem,
    CfeSettings, Genome,
};
use rzones::field::{window9, FieldRaster};
use rzones::Error;

const EPS: f64 = 0.8;

fn problem(t: &Toy, site: (usize, usize)) -> CfeProblem<'_> {
    CfeProblem::for_site(&t.field, site, &t.model, &t.grid, &t.fpca, &t.zones, EPS).unwrap()
}

fn settings(generations: usize) -> CfeSettings {
    CfeSettings { pop_size: 12, generations, ..CfeSettings::default() }
}

fn genome(n: usize, edits: &[(usize, f64)]) -> Genome {
    let mut g = Genome::identity(n);
    for &(i, v) in edits {
        g.values[i] = Some(v);
    }
    g
}

#[test]
fn apply_candidate_identities() {
    let t = toy(12, 2);
    let p = problem(&t, (6, 2));
    assert_eq!(p.passive, vec![1, 2, 3]);
    assert_eq!(apply_candidate(&p, &Genome::identity(3)).unwrap(), p.window);

    let one = apply_candidate(&p, &genome(3, &[(0, 7.5)])).unwrap();
    for (edited, orig) in one.iter().zip(&p.window) {
        for (a, b) in edited.cube.chunks(4).zip(orig.cube.chunks(4)) {
            assert_eq!(a[1], 7.5);
            assert_eq!([a[0], a[2], a[3]], [b[0], b[2], b[3]]);
        }
    }

    let both = apply_candidate(&p, &genome(3, &[(0, 7.5), (2, 4.0)])).unwrap();
    let mut seq = one.clone();
    seq.iter_mut().for_each(|patch| patch.fill_channel(3, 4.0));
    assert_eq!(both, seq);

    match apply_candidate(&p, &genome(3, &[(0, 11.0)])) {
        Err(Error::OutOfBounds { feature: 1, .. }) => {}
        other => panic!("expected out of bounds, got {other:?}"),
    }
    assert!(apply_candidate(&p, &Genome::identity(2)).is_err());
}

#[test]
fn g2_counts_edits() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let n = rng.random_range(1..10);
        let edits: Vec<(usize, f64)> = (0..n).filter(|_| rng.random_bool(0.4)).map(|i| (i, 1.0)).collect();
        assert_eq!(eval_g2(&genome(n, &edits)), edits.len());
    }
}

#[test]
fn g3_known_value() {
    // 8 channels, channel 2 is 0 everywhere and its allowed range is [0, 1]
    let t = toy(12, 6);
    let mut data = Vec::new();
    for _r in 0..12 {
        for c in 0..12 {
            data.extend([50.0, c as f64 * 10.0 / 11.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        }
    }
    let field = FieldRaster::new(12, 12, t.names.clone(), data, vec![true; 144], 10.0).unwrap();
    let mut ranges = field.feature_ranges().to_vec();
    ranges[2] = (0.0, 1.0);
    let window = window9(&field, (6, 6)).unwrap();
    let p = CfeProblem::from_window((6, 6), window, &ranges, &t.model, &t.grid, &t.fpca, &t.zones, EPS).unwrap();
    assert_eq!(p.n_features, 8);
    assert!((eval_g3(&p, &genome(7, &[(1, 1.0)])) - 0.125).abs() < 1e-15);
    assert_eq!(eval_g3(&p, &Genome::identity(7)), 0.0);
    // zero-range channels contribute nothing
    assert_eq!(eval_g3(&p, &genome(7, &[(3, 2.0)])), 0.0);
}

#[test]
fn front_is_mutually_non_dominated_and_reproducible() {
    let t = toy(12, 2);
    let p = problem(&t, (6, 2));
    let front = nsga2(&p, &settings(15), 42).unwrap();
    assert!(!front.is_empty());
    for a in &front {
        for b in &front {
            assert!(!a.objectives.dominates(&b.objectives));
        }
    }
    assert_eq!(nsga2(&p, &settings(15), 42).unwrap(), front);
}

#[test]
fn more_generations_never_worsen_the_pick() {
    let t = toy(12, 3);
    for site in [(6, 2), (3, 9), (8, 5)] {
        let p = problem(&t, site);
        let picks: Vec<_> = [10, 50, 100]
            .iter()
            .map(|&g| select(&nsga2(&p, &settings(g), 7).unwrap()).unwrap().objectives)
            .collect();
        for w in picks.windows(2) {
            assert!(w[1].lexicographic(&w[0]).is_le(), "{site:?}: {picks:?}");
        }
    }
}

#[test]
fn alpha_names_the_edited_features() {
    let t = toy(12, 2);
    let p = problem(&t, (6, 1));
    let r = explain_site(&p, &settings(20), 3, &t.names).unwrap();
    assert!(r.success);
    assert_eq!(r.alpha.len(), r.objectives.g2);
    let from_genome: Vec<usize> = r.genome.changed().iter().map(|&i| p.passive[i]).collect();
    assert_eq!(r.alpha_channels, from_genome);
    for (name, ch) in r.alpha.iter().zip(&r.alpha_channels) {
        assert_eq!(name, &t.names[*ch]);
    }
    assert!(r.alpha.contains(&"S".to_string()));
    assert_ne!(r.new_zone, r.old_zone);
    assert!(r.new_membership > EPS);
    assert!(explain_site(&p, &settings(20), 3, &t.names[..2]).is_err());
}

#[test]
fn zero_generations_with_empty_masks_keeps_identity() {
    let t = toy(12, 2);
    let p = problem(&t, (6, 2));
    let s = CfeSettings { init_mask_density: 0.0, ..settings(0) };
    let r = explain_site(&p, &s, 1, &t.names).unwrap();
    assert!(!r.success);
    assert_eq!(r.genome, Genome::identity(3));
    assert_eq!(r.objectives.g2, 0);
    assert_eq!(r.new_zone, r.old_zone);
}

#[test]
fn centroid_on_candidate_forces_a_flip() {
    let t = toy(12, 2);
    let p = problem(&t, (6, 10));
    let g = genome(3, &[(0, 0.0)]);
    let window = apply_candidate(&p, &g).unwrap();
    let q = eval_g1(&p, &window).unwrap();
    let scores = t.fpca.transform(&q.curve).unwrap();

    let mut zones = t.zones.clone();
    let target = t.zones.membership(&scores).unwrap().0;
    assert_ne!(target, p.original_zone);
    zones.centroids[target] = scores;
    let moved = CfeProblem::for_site(&t.field, (6, 10), &t.model, &t.grid, &t.fpca, &zones, EPS).unwrap();
    assert_eq!(moved.original_zone, p.original_zone);
    let c = evaluate(&moved, &g).unwrap();
    assert_eq!(c.objectives.g1, -1);
    assert_eq!(c.new_zone, target);
    assert_eq!(c.new_membership, 1.0);
}

#[test]
fn scanning_the_driver_finds_a_flip() {
    let t = toy(12, 2);
    let p = problem(&t, (6, 1));
    let (lo, hi) = p.bounds[0];
    let flips = (0..50)
        .map(|i| lo + (hi - lo) * i as f64 / 49.0)
        .filter(|&v| evaluate(&p, &genome(3, &[(0, v)])).unwrap().objectives.g1 == -1)
        .count();
    assert!(flips > 0);
    // inert channels never move the curve
    for v in [0.0, 5.0, 10.0] {
        assert_eq!(evaluate(&p, &genome(3, &[(1, v)])).unwrap().objectives.g1, 0);
    }
}

#[test]
fn results_round_trip_through_jsonl() {
    let t = toy(12, 2);
    let results: Vec<_> = [(6, 1), (6, 10)]
        .iter()
        .map(|&s| explain_site(&problem(&t, s), &settings(5), 9, &t.names).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfe.jsonl");
    write_jsonl(&path, &results).unwrap();
    assert_eq!(read_jsonl(&path).unwrap(), results);
    std::fs::write(&path, "{not json}\n").unwrap();
    assert!(read_jsonl(&path).is_err());
}
