//! Generate a synthetic field with three responsivity classes, write it in
//! csv-grid format and read it back.
//!
//! ```bash
//! cargo run --example synthetic_field
//! ```

use rzones::field::{generate_synthetic, load_field, load_yield, write_field, write_yield, SyntheticSpec};

pub fn run_example() -> rzones::Result<()> {
    let spec = SyntheticSpec {
        height: 30,
        width: 30,
        elliptical_boundary: true,
        ..SyntheticSpec::default()
    };
    let synth = generate_synthetic(&spec)?;
    let field = &synth.field;
    println!(
        "field {}x{}: {} features, {} valid cells",
        field.height(),
        field.width(),
        field.n_features(),
        field.n_valid()
    );
    for (name, (lo, hi)) in field.feature_names().iter().zip(field.feature_ranges()) {
        println!("  {name:>4}: [{lo:.2}, {hi:.2}]");
    }

    let mut per_class = vec![0usize; spec.n_classes()];
    for &c in synth.classes.iter().filter(|&&c| c >= 0) {
        per_class[c as usize] += 1;
    }
    println!("cells per latent class: {per_class:?}");
    for k in 0..spec.n_classes() {
        let ys: Vec<String> = [0.0, 50.0, 100.0, 150.0]
            .iter()
            .map(|&n| format!("{:.1}", spec.class_response(k, n)))
            .collect();
        println!("  class {k} yield at N=0/50/100/150: {}", ys.join(" / "));
    }

    let dir = tempfile::tempdir().map_err(|e| rzones::Error::InvalidArgument(e.to_string()))?;
    let fpath = dir.path().join("field.csv");
    let ypath = dir.path().join("yield.csv");
    write_field(&fpath, field)?;
    write_yield(&ypath, &synth.yields, field.cell_size_m())?;
    let back = load_field(&fpath)?;
    let yback = load_yield(&ypath)?;
    assert_eq!(back.mask(), field.mask());
    assert!(field.valid_sites().all(|(r, c)| back.cell(r, c) == field.cell(r, c)));
    println!("round trip ok, yield range {:?}", yback.range());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
