use proptest::prelude::*;
use rzones::field::{
    extract_patches, generate_synthetic, load_field, parse_field, parse_yield, write_field, FieldRaster, SyntheticSpec,
    SENTINEL,
};
use rzones::Error;

const SMALL: &str = "2,3,2,10\nN\nS\n1,2,3\n4,5,6\n0.5,0.25,-9999\n1,1,1\n";

#[test]
fn parses_small_grid_and_masks_sentinel() {
    let f = parse_field(SMALL).unwrap();
    assert_eq!((f.height(), f.width(), f.n_features()), (2, 3, 2));
    assert_eq!(f.feature_names(), ["N", "S"]);
    assert!(!f.is_valid(0, 2));
    assert_eq!(f.n_valid(), 5);
    assert_eq!(f.value(1, 0, 1), 1.0);
    // ranges skip the masked cell
    assert_eq!(f.feature_ranges()[0], (1.0, 6.0));
    assert_eq!(f.feature_ranges()[1], (0.25, 1.0));
}

#[test]
fn parse_errors_name_line_and_column() {
    let ragged = SMALL.replace("4,5,6", "4,5");
    match parse_field(&ragged) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
        other => panic!("expected parse error, got {other:?}"),
    }
    let bad = SMALL.replace("0.5,0.25", "0.5,abc");
    match parse_field(&bad) {
        Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (6, 2)),
        other => panic!("expected parse error, got {other:?}"),
    }
    let short = SMALL.lines().take(6).collect::<Vec<_>>().join("\n");
    assert!(matches!(parse_field(&short), Err(Error::Parse { .. })));
    assert!(matches!(parse_yield(SMALL), Err(Error::Parse { .. })));
}

#[test]
fn feature_ranges_match_brute_force() {
    let s = generate_synthetic(&SyntheticSpec { height: 25, width: 31, elliptical_boundary: true, ..Default::default() })
        .unwrap();
    let f = &s.field;
    for ch in 0..f.n_features() {
        let vals: Vec<f64> = f.valid_sites().map(|(r, c)| f.value(r, c, ch)).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(f.feature_ranges()[ch], (lo, hi));
    }
}

#[test]
fn synthetic_file_round_trip_preserves_patches() {
    let s = generate_synthetic(&SyntheticSpec { height: 12, width: 12, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    write_field(&p, &s.field).unwrap();
    let back = load_field(&p).unwrap();
    let a = extract_patches(&s.field, &s.yields).unwrap();
    let b = extract_patches(&back, &s.yields).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn csv_round_trip(h in 1usize..6, w in 1usize..6, seed in 0u64..1000, masked in proptest::collection::vec(any::<bool>(), 36)) {
        let n = 3;
        let mut data = Vec::new();
        let mut mask = Vec::new();
        for i in 0..h * w {
            let valid = i == 0 || !masked[i];
            mask.push(valid);
            for s in 0..n {
                let v = ((seed as f64 + 1.0) * (i * n + s) as f64).sin() * 100.0;
                data.push(if valid { v } else { SENTINEL });
            }
        }
        let names = vec!["N".to_string(), "S".to_string(), "A".to_string()];
        let f = FieldRaster::new(h, w, names, data, mask, 5.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_field(&p, &f).unwrap();
        let back = load_field(&p).unwrap();
        prop_assert_eq!(back.mask(), f.mask());
        prop_assert_eq!(back.feature_ranges(), f.feature_ranges());
        for (r, c) in f.valid_sites() {
            prop_assert_eq!(back.cell(r, c), f.cell(r, c));
        }
    }
}
