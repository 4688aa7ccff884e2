//! Generate a synthetic dataset with planted colluders and write it to disk.
//!
//! cargo run --example simulate_dataset -- [OUT_DIR]

use collusion::ingest::load_dir;
use collusion::simulate::{generate, write_dataset, SimConfig};

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("collusion-sim"));
    let cfg = SimConfig {
        num_players: 800,
        num_matches: 400,
        colluder_pairs: 5,
        colluder_strength: 0.8,
        seed: 42,
        ..SimConfig::default()
    };
    let (dataset, truth) = generate(&cfg)?;
    write_dataset(&dataset, &truth, &out)?;

    println!(
        "{} matches, {} players",
        dataset.matches().len(),
        dataset.appearances().len()
    );
    println!("planted pairs:");
    for pair in &truth.colluding_pairs {
        println!("  {pair}");
    }

    let reloaded = load_dir(&out)?;
    assert_eq!(reloaded.dataset.matches().len(), dataset.matches().len());
    println!("wrote and re-read {}", out.display());
    Ok(())
}
