//! Functional PCA on a family of sigmoid response curves and the resulting
//! curve-shape distance.
//!
//! ```bash
//! cargo run --example fpca_distance
//! ```

use rzones::fpca::{FpcaModel, FpcaSettings};
use rzones::response::NGrid;

fn sigmoid_curve(grid: &[f64], plateau: f64, midpoint: f64) -> Vec<f64> {
    let raw: Vec<f64> = grid
        .iter()
        .map(|n| plateau / (1.0 + (-0.06 * (n - midpoint)).exp()))
        .collect();
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    raw.iter().map(|v| v - min).collect()
}

pub fn run_example() -> rzones::Result<()> {
    let grid = NGrid::new(0.0, 150.0, 31)?.samples();
    let mut curves = Vec::new();
    for i in 0..40 {
        let plateau = 10.0 + 1.0 * i as f64;
        let midpoint = 40.0 + 1.5 * (i % 10) as f64;
        curves.push(sigmoid_curve(&grid, plateau, midpoint));
    }
    let refs: Vec<&[f64]> = curves.iter().map(Vec::as_slice).collect();
    let model = FpcaModel::fit(&refs, &FpcaSettings::default())?;
    println!(
        "k = {} components, explained ratios {:?}",
        model.k,
        model.explained_ratio.iter().map(|r| format!("{r:.5}")).collect::<Vec<_>>()
    );

    let a = &curves[0];
    let b = &curves[1];
    let c = &curves[39];
    println!("distance(flat-ish, flat-ish) = {:.3}", model.distance(a, b)?);
    println!("distance(flat-ish, steep)    = {:.3}", model.distance(a, c)?);

    let scores = model.transform(c)?;
    let rebuilt = model.reconstruct(&scores)?;
    let err = c.iter().zip(&rebuilt).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    println!("reconstruction error of the steep curve: {err:.4}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
