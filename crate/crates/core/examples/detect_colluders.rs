//! Full pipeline on a simulated dataset: score opponent pairs, print the top
//! of the ranked report and check it against the planted pairs.

use collusion::detect::{
    evaluate, run_detection, write_report, DetectConfig, ReportFormat, Threshold,
};
use collusion::simulate::{generate, SimConfig};

fn main() -> anyhow::Result<()> {
    let (dataset, truth) = generate(&SimConfig::default())?;
    let cfg = DetectConfig {
        threshold: Threshold::TopK(20),
        ..DetectConfig::default()
    };
    let det = run_detection(&dataset, &cfg)?;
    println!("scored {} opponent pairs\n", det.scored);

    println!(
        "{:>4} {:<14} {:>7} {:>5} {:>9} {:>7} {:>4} {:>8}  planted",
        "rank", "pair", "score", "acq", "rankdiff", "streak", "n", "distance"
    );
    for f in det.report.iter().take(10) {
        let x = &f.features;
        println!(
            "{:>4} {:<14} {:>7.3} {:>5} {:>9.2} {:>7} {:>4} {:>8.0}  {}",
            f.rank_in_report,
            format!("{}", f.pair),
            f.score.value(),
            x.acquaintance,
            x.avg_rank_diff_opp.unwrap_or(f64::NAN),
            x.max_consecutive_opp,
            x.num_matches_opp,
            x.avg_distance_opp.unwrap_or(f64::NAN),
            truth.colluding_pairs.contains(&f.pair)
        );
    }

    let e = evaluate(&det.report, &truth, 20);
    println!(
        "\nrecall@20 {:.2}, precision@20 {:.2} ({} of {} planted pairs)",
        e.recall_at_k,
        e.precision_at_k,
        e.planted_found,
        truth.colluding_pairs.len()
    );

    let mut csv = Vec::new();
    write_report(&det.report[..3], ReportFormat::Csv, &mut csv)?;
    println!("\nfirst report rows as CSV:\n{}", String::from_utf8(csv)?);
    Ok(())
}
