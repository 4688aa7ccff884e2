//! Chance baselines for two opposing teams finishing one rank apart.

use collusion::probability::{
    binomial_event_prob, p_rank_adjacent, p_rank_adjacent_top, p_rank_adjacent_top_exact,
};

fn main() -> anyhow::Result<()> {
    println!(
        "{:>6} {:>12} {:>16}",
        "teams", "adjacent", "adjacent top-10"
    );
    for t in [10, 20, 50, 100] {
        println!(
            "{t:>6} {:>12.6} {:>16.6}",
            p_rank_adjacent(t)?,
            p_rank_adjacent_top(t, 10)?
        );
    }

    let p = p_rank_adjacent_top(20, 10)?;
    println!(
        "\n20 teams, top 10: p = {} = {p:.6}",
        p_rank_adjacent_top_exact(20, 10)?
    );
    println!(
        "P(exactly 3 of 5 matches) = {:.6}",
        binomial_event_prob(5, 3, p)?
    );
    println!(
        "same with p rounded to 0.047 = {:.5}",
        binomial_event_prob(5, 3, 0.047)?
    );
    let at_least: f64 = (3..=5)
        .map(|k| binomial_event_prob(5, k, p))
        .sum::<Result<f64, _>>()?;
    println!("P(3 or more of 5) = {at_least:.6}");
    Ok(())
}
