//! Compute opponent-pair features and list the pairs with the longest
//! back-to-back runs.

use collusion::features::{extract_pairs, pair_observations, PairContext};
use collusion::ingest::filter_active_players;
use collusion::simulate::{generate, SimConfig};

fn main() -> anyhow::Result<()> {
    let (dataset, truth) = generate(&SimConfig {
        num_players: 800,
        num_matches: 500,
        colluder_pairs: 4,
        seed: 3,
        ..SimConfig::default()
    })?;
    let active = filter_active_players(&dataset, 3);
    let mut rows = extract_pairs(&active, 4, PairContext::Opponent);
    println!("{} opponent pairs met 4+ times", rows.len());

    rows.sort_by(|a, b| {
        b.max_consecutive_opp
            .cmp(&a.max_consecutive_opp)
            .then(a.pair.cmp(&b.pair))
    });
    println!(
        "{:<16} {:>5} {:>7} {:>10} {:>9} {:>6} planted",
        "pair", "n", "streak", "distance", "rankdiff", "acq"
    );
    for r in rows.iter().take(10) {
        println!(
            "{:<16} {:>5} {:>7} {:>10.0} {:>9.2} {:>6} {}",
            r.pair.to_string(),
            r.num_matches_opp,
            r.max_consecutive_opp,
            r.avg_distance_opp.unwrap_or(f64::NAN),
            r.avg_rank_diff_opp.unwrap_or(f64::NAN),
            r.acquaintance,
            truth.colluding_pairs.contains(&r.pair)
        );
    }

    let top = &rows[0].pair;
    println!("\nshared matches of {top}:");
    for o in pair_observations(&dataset, top) {
        println!(
            "  {} {:?} distance {:>8.0} ranks {:>2}/{:<2} ordinals {}/{}",
            o.match_id,
            o.context,
            o.distance,
            o.rank_a,
            o.rank_b,
            o.match_ordinal_a,
            o.match_ordinal_b
        );
    }
    Ok(())
}
