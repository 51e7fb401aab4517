//! Train the reference patch network on a small synthetic field, verify its
//! gradients against finite differences, and round-trip the model file.
//!
//! ```bash
//! cargo run --release --example train_surrogate
//! ```

use rzones::field::{extract_patches, generate_synthetic, split_patches, SyntheticSpec};
use rzones::surrogate::{rmse, train, Activation, DenseNet, PatchRegressor, TrainConfig};

pub fn run_example() -> rzones::Result<()> {
    let spec = SyntheticSpec {
        height: 20,
        width: 20,
        ..SyntheticSpec::default()
    };
    let synth = generate_synthetic(&spec)?;
    let patches = extract_patches(&synth.field, &synth.yields)?;
    let (train_set, val_set) = split_patches(patches, 0.8, 1)?;
    println!("{} training / {} validation patches", train_set.len(), val_set.len());

    let mut net = DenseNet::for_field(&synth.field, synth.yields.range(), &[32, 16], Activation::Tanh, 7)?;
    let worst = net.gradient_check(&train_set[0].cube, train_set[0].target.as_ref().unwrap(), 1e-6)?;
    println!("gradient check: max relative error {worst:.2e}");

    let before = rmse(&net, &val_set)?;
    let config = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let report = train(&mut net, &train_set, &val_set, &config)?;
    println!(
        "validation RMSE {before:.2} -> {:.2} (yield range {:?})",
        report.final_val_rmse,
        synth.yields.range()
    );
    let first = report.loss_history.first().unwrap();
    let last = report.loss_history.last().unwrap();
    println!("epoch loss {first:.4e} -> {last:.4e}");

    let dir = tempfile::tempdir().map_err(|e| rzones::Error::InvalidArgument(e.to_string()))?;
    let path = dir.path().join("model.json");
    net.save(&path)?;
    let back = DenseNet::load(&path)?;
    assert_eq!(back.predict(&val_set[0].cube)?, net.predict(&val_set[0].cube)?);
    println!("model saved and reloaded with identical predictions");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
