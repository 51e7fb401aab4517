//! Sweep nitrogen through a trained surrogate to get per-site response
//! curves, then align them to a common zero baseline.
//!
//! ```bash
//! cargo run --release --example response_curves
//! ```

use rzones::field::{extract_patches, generate_synthetic, split_patches, SyntheticSpec};
use rzones::response::{align, field_curves, render_curves_csv, site_curve, NGrid};
use rzones::surrogate::{train, Activation, DenseNet, TrainConfig};

pub fn run_example() -> rzones::Result<()> {
    let spec = SyntheticSpec {
        height: 20,
        width: 20,
        ..SyntheticSpec::default()
    };
    let synth = generate_synthetic(&spec)?;
    let (tr, va) = split_patches(extract_patches(&synth.field, &synth.yields)?, 0.9, 0)?;
    let mut net = DenseNet::for_field(&synth.field, synth.yields.range(), &[32, 16], Activation::Tanh, 1)?;
    train(&mut net, &tr, &va, &TrainConfig { epochs: 150, ..TrainConfig::default() })?;

    let grid = NGrid::new(0.0, 150.0, 16)?;
    let set = field_curves(&net, &synth.field, &grid)?;
    println!("{} aligned curves on {} nitrogen rates", set.curves.len(), grid.steps);

    // the per-site route agrees with the batched one bit for bit
    let site = (10, 10);
    let one = align(&site_curve(&net, &synth.field, site, &grid)?);
    let batched = set.curves.iter().find(|c| c.site == site).unwrap();
    assert_eq!(one.values, batched.values);

    for row in [2, 10, 17] {
        let c = set.curves.iter().find(|c| c.site == (row, 10)).unwrap();
        let class = synth.classes[row * 20 + 10];
        let pts: Vec<String> = c.values.iter().step_by(5).map(|v| format!("{v:5.1}")).collect();
        println!("  site ({row:2}, 10) class {class}: {}", pts.join(" "));
    }

    let csv = render_curves_csv(&grid, &set.curves[..3]);
    println!("{}", csv.lines().next().unwrap());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
