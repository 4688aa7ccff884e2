//! Fit an isolation forest on a 2-D blob with a few planted outliers, then
//! save and reload the model.

use collusion::iforest::{fit, ForestModel, ForestParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 1.0)?;
    let mut data: Vec<[f64; 2]> = (0..500)
        .map(|_| [noise.sample(&mut rng), noise.sample(&mut rng)])
        .collect();
    data.extend([[6.0, 6.0], [-5.0, 7.0], [0.0, -8.0]]);

    let params = ForestParams {
        n_trees: 200,
        subsample: 256,
        seed: 9,
        ..ForestParams::default()
    };
    let model = fit(&data, &params)?;
    let scores = model.score_all(&data)?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    println!("five lowest scores (negative = outlier):");
    for &i in &order[..5] {
        println!("  row {i:>3} {:>6.2?} score {}", data[i], scores[i]);
    }
    let outliers = scores.iter().filter(|s| s.is_outlier()).count();
    println!("{outliers} of {} rows score below zero", data.len());

    let bytes = model.serialize();
    let restored = ForestModel::deserialize(&bytes)?;
    assert_eq!(restored.score(&data[0])?, model.score(&data[0])?);
    println!("model file is {} bytes and round-trips", bytes.len());
    Ok(())
}
