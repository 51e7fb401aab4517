use rzones::field::{generate_synthetic, SyntheticSpec};
use rzones::response::{align, field_curves, parse_curves_csv, read_curves_csv, render_curves_csv, site_curve, write_curves_csv, NGrid, ResponseCurve};
use rzones::surrogate::{Activation, CellwiseModel, DenseNet};

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn field_curves_match_site_curves_on_masked_field() {
    let s = generate_synthetic(&SyntheticSpec { height: 14, width: 12, elliptical_boundary: true, ..Default::default() }).unwrap();
    assert!(s.field.valid_sites().count() < 14 * 12);
    let net = DenseNet::for_field(&s.field, s.yields.range(), &[10], Activation::Tanh, 8).unwrap();
    let grid = NGrid::new(0.0, 200.0, 9).unwrap();
    let set = field_curves(&net, &s.field, &grid).unwrap();
    assert_eq!(set.curves.len() + set.skipped.len(), s.field.valid_sites().count());
    for c in &set.curves {
        let single = align(&site_curve(&net, &s.field, c.site, &grid).unwrap());
        assert_eq!(bits(&single.values), bits(&c.values), "site {:?}", c.site);
        assert!(c.aligned);
        assert_eq!(c.values.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
    }
    for site in &set.skipped {
        assert!(site_curve(&net, &s.field, *site, &grid).is_err());
    }
}

#[test]
fn nitrogen_blind_model_gives_flat_curves() {
    let s = generate_synthetic(&SyntheticSpec { height: 8, width: 8, ..Default::default() }).unwrap();
    let n = s.field.n_features();
    let model = CellwiseModel::new(n, |cell: &[f64]| 30.0 + cell[1] * 2.0 - cell[3]);
    let set = field_curves(&model, &s.field, &NGrid::default()).unwrap();
    assert!(set.curves.iter().all(|c| c.values.iter().all(|&v| v == 0.0)));

    // a response rising in N keeps its shape after alignment
    let rising = CellwiseModel::new(n, |cell: &[f64]| 5.0 + 0.1 * cell[0]);
    let set = field_curves(&rising, &s.field, &NGrid::new(0.0, 100.0, 5).unwrap()).unwrap();
    for c in &set.curves {
        for (v, want) in c.values.iter().zip([0.0, 2.5, 5.0, 7.5, 10.0]) {
            assert!((v - want).abs() < 1e-12);
        }
    }
}

#[test]
fn curve_csv_round_trips() {
    let s = generate_synthetic(&SyntheticSpec { height: 9, width: 9, ..Default::default() }).unwrap();
    let net = DenseNet::for_field(&s.field, s.yields.range(), &[6], Activation::Tanh, 1).unwrap();
    let set = field_curves(&net, &s.field, &NGrid::new(10.0, 170.0, 7).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curves.csv");
    write_curves_csv(&path, &set).unwrap();
    let back = read_curves_csv(&path).unwrap();
    assert_eq!(back.grid, set.grid);
    assert_eq!(back.curves, set.curves);
}

#[test]
fn curve_csv_reports_bad_rows() {
    let grid = NGrid::new(0.0, 10.0, 3).unwrap();
    let curve = ResponseCurve { site: (1, 2), values: vec![0.0, 1.0, 2.0], aligned: true };
    let good = render_curves_csv(&grid, &[curve]);
    assert!(parse_curves_csv(&good).is_ok());
    assert!(parse_curves_csv("").is_err());
    assert!(parse_curves_csv("row,col,0,1\n").is_err());
    let ragged = format!("{good}3,4,0,1\n");
    assert!(parse_curves_csv(&ragged).unwrap_err().to_string().contains("3"));
    let bad = format!("{good}3,4,0,x,2\n");
    assert!(parse_curves_csv(&bad).is_err());
}
