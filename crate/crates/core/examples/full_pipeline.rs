//! Every stage from the bundled demo config: synthetic field, surrogate,
//! curves, fPCA, zones, counterfactuals and the relevance report, with a
//! hashed manifest.
//!
//! ```bash
//! cargo run --release --example full_pipeline
//! ```

use rzones::cli::{run_pipeline, RunConfig};
use rzones::zones::adjusted_rand_index;

pub fn run_example() -> rzones::Result<()> {
    let config_path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/demo.json");
    let mut config = RunConfig::load(config_path)?;
    let dir = tempfile::tempdir().map_err(|e| rzones::Error::InvalidArgument(e.to_string()))?;
    config.output_dir = dir.path().to_path_buf();

    let out = run_pipeline(&config)?;
    for a in &out.manifest.artifacts {
        println!("{:>8}  {:<15} {}", a.stage, a.path, &a.sha256[..16]);
    }

    if let Some(classes) = &out.classes {
        let w = out.field.width();
        let truth: Vec<usize> = out.zones.sites.iter().map(|&(r, c)| classes[r * w + c] as usize).collect();
        println!("zones vs latent classes ARI = {:.3}", adjusted_rand_index(&out.zones.assignments, &truth)?);
    }
    for z in &out.relevance.zones {
        let top = z.top_feature().map(|i| out.relevance.features[i].as_str()).unwrap_or("-");
        println!(
            "zone {}: success {:.0}% over {} sites, most edited feature {top}",
            z.zone,
            100.0 * z.success_rate,
            z.explained
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    rzones::cli::init_logging(false);
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
