//! Fuzzy c-means on score vectors: three blobs, membership queries for new
//! points, and a zone map written as CSV and PGM.
//!
//! ```bash
//! cargo run --example fuzzy_zones
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rzones::field::FieldRaster;
use rzones::fpca::ScoreVector;
use rzones::zones::{adjusted_rand_index, cluster, ClusterSettings};

pub fn run_example() -> rzones::Result<()> {
    let (h, w) = (12, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let centers = [[0.0, 0.0], [8.0, 0.0], [4.0, 7.0]];
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for r in 0..h {
        for c in 0..w {
            // three vertical bands
            let k = c * 3 / w;
            let s = centers[k].iter().map(|v| v + noise.sample(&mut rng)).collect();
            scores.push(ScoreVector { site: (r, c), scores: s });
            labels.push(k);
        }
    }
    let model = cluster(&scores, &ClusterSettings { zones: 3, seed: 1, ..ClusterSettings::default() })?;
    println!(
        "{} iterations, objective {:.2} -> {:.2}",
        model.iterations,
        model.objective_history[0],
        model.objective_history.last().unwrap()
    );
    println!("ARI vs bands: {:.3}", adjusted_rand_index(&model.assignments, &labels)?);

    for p in [[4.0, 3.5], [7.5, 0.2]] {
        let (zone, u) = model.membership(&p)?;
        let u: Vec<String> = u.iter().map(|v| format!("{v:.3}")).collect();
        println!("point {p:?} -> zone {zone}, memberships [{}]", u.join(", "));
    }

    let field = FieldRaster::new(h, w, vec!["N".into(), "S".into()], vec![0.0; h * w * 2], vec![true; h * w], 10.0)
?;
    let map = model.zone_map(&field)?;
    print!("{}", map.to_csv().lines().take(3).map(|l| format!("  {l}\n")).collect::<String>());
    println!("PGM image: {} bytes", map.to_pgm().len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
