use proptest::prelude::*;
use rzones::fpca::{symmetric_eigen, FpcaModel, FpcaSettings};
use rzones::response::ResponseCurve;

fn curves_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3usize..10, 4usize..16).prop_flat_map(|(steps, m)| {
        prop::collection::vec(prop::collection::vec(-20.0f64..20.0, steps), m)
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn components_are_orthonormal(curves in curves_strategy()) {
        let refs: Vec<&[f64]> = curves.iter().map(Vec::as_slice).collect();
        let steps = curves[0].len();
        let model = FpcaModel::fit(&refs, &FpcaSettings { variance_target: 1.0, k_max: steps }).unwrap();
        for (i, a) in model.components.iter().enumerate() {
            for (j, b) in model.components.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot(a, b) - want).abs() < 1e-9, "<v{i},v{j}> = {}", dot(a, b));
            }
        }
        prop_assert!(model.spectrum.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn reconstruction_error_bounded_by_unexplained_variance(curves in curves_strategy(), k_max in 1usize..4) {
        let refs: Vec<&[f64]> = curves.iter().map(Vec::as_slice).collect();
        let model = FpcaModel::fit(&refs, &FpcaSettings { variance_target: 1.0, k_max }).unwrap();
        let m = curves.len() as f64;
        let mut residual = 0.0;
        for c in &curves {
            let back = model.reconstruct(&model.transform(c).unwrap()).unwrap();
            residual += c.iter().zip(&back).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        }
        let explained: f64 = model.explained_ratio.iter().sum();
        let bound = (1.0 - explained) * model.total_variance;
        prop_assert!(residual / m <= bound + 1e-9 * model.total_variance.max(1.0), "{} > {}", residual / m, bound);
    }

    #[test]
    fn distance_is_a_pseudometric(curves in curves_strategy()) {
        let refs: Vec<&[f64]> = curves.iter().map(Vec::as_slice).collect();
        let model = FpcaModel::fit(&refs, &FpcaSettings::default()).unwrap();
        let (a, b, c) = (&curves[0], &curves[1], &curves[2]);
        prop_assert_eq!(model.distance(a, a).unwrap(), 0.0);
        prop_assert!((model.distance(a, b).unwrap() - model.distance(b, a).unwrap()).abs() < 1e-12);
        prop_assert!(model.distance(a, c).unwrap() <= model.distance(a, b).unwrap() + model.distance(b, c).unwrap() + 1e-9);
    }
}

#[test]
fn eigen_solver_on_known_matrix() {
    // diag(3, 1) rotated by 45 degrees
    let (vals, vecs) = symmetric_eigen(&[2.0, 1.0, 1.0, 2.0], 2).unwrap();
    assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
    let s = 0.5f64.sqrt();
    assert!((vecs[0][0] - s).abs() < 1e-12 && (vecs[0][1] - s).abs() < 1e-12);
    assert!(symmetric_eigen(&[1.0, 2.0, 3.0], 2).is_err());
}

#[test]
fn rejects_bad_input() {
    let s = FpcaSettings::default();
    assert!(FpcaModel::fit(&[&[1.0, 2.0][..]], &s).is_err());
    assert!(FpcaModel::fit(&[&[1.0, 2.0][..], &[1.0][..]], &s).is_err());
    assert!(FpcaModel::fit(&[&[1.0, 2.0][..], &[1.0, 2.0][..]], &s).is_err());
    assert!(FpcaModel::fit(&[&[1.0, f64::NAN][..], &[1.0, 2.0][..]], &s).is_err());
    let raw = ResponseCurve { site: (0, 0), values: vec![1.0, 2.0], aligned: false };
    let ok = ResponseCurve { site: (0, 1), values: vec![0.0, 2.0], aligned: true };
    assert!(FpcaModel::fit_curves(&[raw, ok.clone()], &s).is_err());
    let model = FpcaModel::fit(&[&[0.0, 1.0, 4.0][..], &[0.0, 2.0, 3.0][..], &[1.0, 0.0, 0.0][..]], &s).unwrap();
    assert!(model.transform(&[1.0]).is_err());
    assert!(model.reconstruct(&vec![0.0; model.k + 1]).is_err());
}

#[test]
fn model_file_round_trip() {
    let curves = [vec![0.0, 1.0, 3.0, 6.0], vec![0.0, 2.0, 2.5, 2.6], vec![1.0, 0.0, 0.5, 4.0], vec![0.0, 0.1, 0.2, 0.3]];
    let refs: Vec<&[f64]> = curves.iter().map(Vec::as_slice).collect();
    let model = FpcaModel::fit(&refs, &FpcaSettings::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fpca.json");
    model.save(&path).unwrap();
    assert_eq!(FpcaModel::load(&path).unwrap(), model);
    std::fs::write(&path, "{\"k\": 2}").unwrap();
    assert!(FpcaModel::load(&path).is_err());
}
