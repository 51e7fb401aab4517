//! Counterfactual explanation of one site's zone on a field where a single
//! terrain feature sets the yield response. NSGA-II should find that moving
//! that feature alone flips the zone.
//!
//! ```bash
//! cargo run --release --example counterfactuals
//! ```

use rzones::cfe::{explain_site, nsga2, CfeProblem, CfeSettings};
use rzones::field::FieldRaster;
use rzones::fpca::{FpcaModel, FpcaSettings};
use rzones::response::{field_curves, NGrid};
use rzones::surrogate::CellwiseModel;
use rzones::zones::{cluster, ClusterSettings};

pub fn run_example() -> rzones::Result<()> {
    let (h, w) = (13, 13);
    let names: Vec<String> = ["N", "S", "TPI"].iter().map(|s| s.to_string()).collect();
    let mut data = Vec::new();
    for r in 0..h {
        for c in 0..w {
            data.extend([0.0, 10.0 * c as f64 / (w - 1) as f64, (r as f64 * 0.7).sin()]);
        }
    }
    let field = FieldRaster::new(h, w, names.clone(), data, vec![true; h * w], 10.0)?;
    // slope scales the response plateau; TPI has no effect
    let model = CellwiseModel::new(3, |cell: &[f64]| {
        40.0 + (10.0 + 4.0 * cell[1]) / (1.0 + (-0.06 * (cell[0] - 60.0)).exp())
    });

    let grid = NGrid::new(0.0, 150.0, 31)?;
    let curves = field_curves(&model, &field, &grid)?;
    let fpca = FpcaModel::fit_curves(&curves.curves, &FpcaSettings::default())?;
    let scores = curves
        .curves
        .iter()
        .map(|c| fpca.transform_curve(c))
        .collect::<rzones::Result<Vec<_>>>()?;
    let zones = cluster(&scores, &ClusterSettings { zones: 3, ..ClusterSettings::default() })?;
    println!("fPCA k = {}, zones along the slope gradient:", fpca.k);
    println!("  {}", zones.zone_map(&field)?.to_csv().lines().next().unwrap());

    let settings = CfeSettings::default();
    let problem = CfeProblem::for_site(&field, (6, 2), &model, &grid, &fpca, &zones, settings.epsilon)?;
    let front = nsga2(&problem, &settings, 42)?;
    println!("final front: {} candidates", front.len());
    let result = explain_site(&problem, &settings, 42, &names)?;
    println!(
        "site {:?}: zone {} -> {} (membership {:.3}), changed {:?}, g3 = {:.4}",
        result.site, result.old_zone, result.new_zone, result.new_membership, result.alpha, result.objectives.g3
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
